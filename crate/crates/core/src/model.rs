//! State space and exact single-jump dynamics of the centroid model.
//!
//! A [`State`] holds the attachment status of `n` sites, their positions,
//! and the centroid slot. Whenever at least one site is attached the
//! centroid equals the mean of the attached positions; with none attached
//! it keeps its last value. Sites are indexed `0..n`, and the centroid plays
//! the role of slot `n`.
//!
//! The jump kernel is never materialized. It exists operationally as
//! [`rate`] (total event rate), [`sample_jump`] (draw the next state) and
//! [`expect_one_step`] (integrate a function against the next-state law).

use rand::Rng;

use crate::error::{ensure_dim, ensure_len, Error, Result};
use crate::stochastic::{inf_norm, make_rng, PerturbationDistribution};

/// Absolute per-coordinate tolerance on `Σ ψ_i (v_i − centroid)`.
pub const CENTROID_TOLERANCE: f64 = 1e-9;

/// Rate constants, site count, and the perturbation law.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    theta_a: f64,
    theta_d: f64,
    n: usize,
    eta: PerturbationDistribution,
    support_radius: f64,
}

impl ModelParams {
    /// `theta_a`, `theta_d` are per-second rates; the spatial dimension is
    /// taken from `eta`.
    pub fn new(theta_a: f64, theta_d: f64, n: usize, eta: PerturbationDistribution) -> Result<Self> {
        for (name, v) in [("theta_a", theta_a), ("theta_d", theta_d)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if n == 0 {
            return Err(Error::InvalidParameter("site count n must be ≥ 1".into()));
        }
        Ok(Self { theta_a, theta_d, n, support_radius: eta.support_radius(), eta })
    }

    /// Overrides the declared ∞-norm support radius `R` used by the growth
    /// bounds. A value below the true radius makes those bounds fail.
    pub fn with_support_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidParameter(format!("support radius must be ≥ 0, got {radius}")));
        }
        self.support_radius = radius;
        Ok(self)
    }

    pub fn theta_a(&self) -> f64 {
        self.theta_a
    }

    pub fn theta_d(&self) -> f64 {
        self.theta_d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.eta.dim()
    }

    pub fn eta(&self) -> &PerturbationDistribution {
        &self.eta
    }

    pub fn eta_mean(&self) -> &[f64] {
        self.eta.mean()
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// `n · max(θ_a, θ_d)`, an upper bound on the event rate.
    pub fn theta_bound(&self) -> f64 {
        self.n as f64 * self.theta_a.max(self.theta_d)
    }

    /// Event rate with `k` sites attached.
    #[inline]
    pub fn rate_for_count(&self, k: usize) -> f64 {
        self.theta_d * k as f64 + self.theta_a * (self.n - k) as f64
    }

    /// Projected jump law from count `k`: `(P(k → k−1), P(k → k+1))`.
    pub fn count_transition(&self, k: usize) -> (f64, f64) {
        let c = self.rate_for_count(k);
        (self.theta_d * k as f64 / c, self.theta_a * (self.n - k) as f64 / c)
    }
}

/// Number of attached sites, `0 ≤ k ≤ n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttachCount(usize);

impl AttachCount {
    pub fn new(k: usize, n: usize) -> Result<Self> {
        if k > n {
            return Err(Error::IndexOutOfRange { index: k, n: n + 1 });
        }
        Ok(Self(k))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Status vector, site positions and centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    psi: Vec<bool>,
    // row-major, n × dim
    positions: Vec<f64>,
    centroid: Vec<f64>,
    dim: usize,
    attached: usize,
}

impl State {
    /// Builds a state, checking the centroid constraint to
    /// `CENTROID_TOLERANCE` scaled by the largest coordinate magnitude.
    pub fn new(psi: Vec<bool>, positions: Vec<Vec<f64>>, centroid: Vec<f64>) -> Result<Self> {
        let n = psi.len();
        if n == 0 {
            return Err(Error::InvalidState("state needs at least one site".into()));
        }
        ensure_len(n, positions.len())?;
        let dim = centroid.len();
        if dim == 0 {
            return Err(Error::InvalidState("spatial dimension must be ≥ 1".into()));
        }
        let mut flat = Vec::with_capacity(n * dim);
        for p in &positions {
            ensure_dim(dim, p.len())?;
            flat.extend_from_slice(p);
        }
        if flat.iter().chain(&centroid).any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("coordinates must be finite".into()));
        }
        let state = Self { attached: psi.iter().filter(|&&b| b).count(), psi, positions: flat, centroid, dim };
        let tol = CENTROID_TOLERANCE * state.growth_norm().max(1.0);
        if state.centroid_residual() > tol {
            return Err(Error::InvalidState(format!(
                "centroid is not the mean of attached sites (residual {:e})",
                state.centroid_residual()
            )));
        }
        Ok(state)
    }

    /// First `k` sites attached, every site and the centroid at `origin`.
    pub fn with_attached(n: usize, k: usize, origin: &[f64]) -> Result<Self> {
        if n == 0 || origin.is_empty() {
            return Err(Error::InvalidState("need n ≥ 1 and dim ≥ 1".into()));
        }
        if k > n {
            return Err(Error::IndexOutOfRange { index: k, n: n + 1 });
        }
        Ok(Self {
            psi: (0..n).map(|i| i < k).collect(),
            positions: origin.repeat(n),
            centroid: origin.to_vec(),
            dim: origin.len(),
            attached: k,
        })
    }

    /// All sites attached at `origin`, the default starting configuration.
    pub fn all_attached(n: usize, origin: &[f64]) -> Result<Self> {
        Self::with_attached(n, n, origin)
    }

    pub fn n(&self) -> usize {
        self.psi.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn psi(&self) -> &[bool] {
        &self.psi
    }

    pub fn is_attached(&self, i: usize) -> bool {
        self.psi[i]
    }

    pub fn attached_count(&self) -> usize {
        self.attached
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim)
    }

    pub fn centroid(&self) -> &[f64] {
        &self.centroid
    }

    /// Largest per-coordinate magnitude of `Σ ψ_i (v_i − centroid)`.
    pub fn centroid_residual(&self) -> f64 {
        (0..self.dim)
            .map(|d| {
                self.positions()
                    .zip(&self.psi)
                    .filter(|(_, &a)| a)
                    .map(|(p, _)| p[d] - self.centroid[d])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// `g`: the largest ∞-norm over all site positions and the centroid.
    pub fn growth_norm(&self) -> f64 {
        inf_norm(&self.positions).max(inf_norm(&self.centroid))
    }

    /// Mean of attached positions, recomputed from scratch.
    pub fn attached_mean(&self) -> Option<Vec<f64>> {
        if self.attached == 0 {
            return None;
        }
        let mut mean = vec![0.0; self.dim];
        for (p, _) in self.positions().zip(&self.psi).filter(|(_, &a)| a) {
            for (m, x) in mean.iter_mut().zip(p) {
                *m += x;
            }
        }
        let k = self.attached as f64;
        mean.iter_mut().for_each(|m| *m /= k);
        Some(mean)
    }

    /// Snaps the centroid to the recomputed attached mean. No-op with no
    /// site attached.
    pub fn renormalize_centroid(&mut self) {
        if let Some(mean) = self.attached_mean() {
            self.centroid = mean;
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: i, n: self.n() })
        }
    }

    pub(crate) fn check_against(&self, params: &ModelParams) -> Result<()> {
        ensure_len(params.n(), self.n())?;
        ensure_dim(params.dim(), self.dim)
    }

    /// Detachment map `D_i`, in place.
    pub fn detach_in_place(&mut self, i: usize) -> Result<()> {
        self.check_index(i)?;
        if !self.psi[i] {
            return Err(Error::NotAttached(i));
        }
        self.detach_unchecked(i);
        Ok(())
    }

    #[inline]
    fn detach_unchecked(&mut self, i: usize) {
        let k = self.attached;
        if k > 1 {
            let others = (k - 1) as f64;
            let p = &self.positions[i * self.dim..(i + 1) * self.dim];
            for (c, x) in self.centroid.iter_mut().zip(p) {
                *c -= (x - *c) / others;
            }
        }
        self.psi[i] = false;
        self.attached = k - 1;
    }

    /// Attachment map `A_i` with the given perturbation, in place.
    pub fn attach_in_place(&mut self, i: usize, perturbation: &[f64]) -> Result<()> {
        self.check_index(i)?;
        ensure_dim(self.dim, perturbation.len())?;
        if self.psi[i] {
            return Err(Error::NotDetached(i));
        }
        self.positions[i * self.dim..(i + 1) * self.dim].copy_from_slice(perturbation);
        self.finish_attach(i);
        Ok(())
    }

    /// Completes `A_i` when the slot of site `i` already holds the raw
    /// perturbation.
    #[inline]
    fn finish_attach(&mut self, i: usize) {
        let enlarged = (self.attached + 1) as f64;
        let slot = &mut self.positions[i * self.dim..(i + 1) * self.dim];
        for (p, c) in slot.iter_mut().zip(self.centroid.iter_mut()) {
            let x = *p;
            *p = x + *c;
            *c += x / enlarged;
        }
        self.psi[i] = true;
        self.attached += 1;
    }

    /// Draws one jump of the embedded chain and applies it in place.
    ///
    /// Site `i` is chosen with probability `r_i(ψ)` from a single uniform
    /// draw: attached sites share the first `θ_d·k` of the total rate.
    #[inline]
    pub fn jump_in_place<R: Rng + ?Sized>(&mut self, params: &ModelParams, rng: &mut R) -> Jump {
        let k = self.attached;
        let n = self.n();
        let detach_mass = params.theta_d * k as f64;
        let total = detach_mass + params.theta_a * (n - k) as f64;
        let u = rng.random::<f64>() * total;
        if u < detach_mass {
            let rank = ((u / params.theta_d) as usize).min(k - 1);
            let site = nth_with_status(&self.psi, true, rank);
            self.detach_unchecked(site);
            Jump { site, attached: false }
        } else {
            let rank = (((u - detach_mass) / params.theta_a) as usize).min(n - k - 1);
            let site = nth_with_status(&self.psi, false, rank);
            params.eta.sample_into(rng, &mut self.positions[site * self.dim..(site + 1) * self.dim]);
            self.finish_attach(site);
            Jump { site, attached: true }
        }
    }

    /// Applies a status change of site `i` driven by an external clock:
    /// detaches if attached, otherwise attaches with a fresh perturbation.
    #[inline]
    pub(crate) fn toggle_site<R: Rng + ?Sized>(&mut self, i: usize, params: &ModelParams, rng: &mut R) {
        if self.psi[i] {
            self.detach_unchecked(i);
        } else {
            params.eta.sample_into(rng, &mut self.positions[i * self.dim..(i + 1) * self.dim]);
            self.finish_attach(i);
        }
    }
}

#[inline]
fn nth_with_status(psi: &[bool], status: bool, rank: usize) -> usize {
    psi.iter().enumerate().filter(|(_, &s)| s == status).nth(rank).map(|(i, _)| i).expect("rank within group size")
}

/// Which site changed and its new status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Jump {
    pub site: usize,
    pub attached: bool,
}

/// Total event rate `θ_d|ψ| + θ_a(n − |ψ|)`.
pub fn rate(state: &State, params: &ModelParams) -> Result<f64> {
    state.check_against(params)?;
    Ok(params.rate_for_count(state.attached_count()))
}

/// Probability `r_i(ψ)` that site `i` is the next to change status.
pub fn site_selection_probs(psi: &[bool], params: &ModelParams) -> Result<Vec<f64>> {
    ensure_len(params.n(), psi.len())?;
    let k = psi.iter().filter(|&&b| b).count();
    let total = params.rate_for_count(k);
    Ok(psi.iter().map(|&a| if a { params.theta_d } else { params.theta_a } / total).collect())
}

/// `s_i(ψ)`: `psi` with entry `i` negated.
pub fn flip_status(psi: &[bool], i: usize) -> Result<Vec<bool>> {
    if i >= psi.len() {
        return Err(Error::IndexOutOfRange { index: i, n: psi.len() });
    }
    let mut out = psi.to_vec();
    out[i] = !out[i];
    Ok(out)
}

/// `D_i`: detach site `i`; the centroid moves to the mean of the rest.
pub fn detach(state: &State, i: usize) -> Result<State> {
    let mut next = state.clone();
    next.detach_in_place(i)?;
    Ok(next)
}

/// `A_i`: attach site `i` at `perturbation + centroid`.
pub fn attach(state: &State, i: usize, perturbation: &[f64]) -> Result<State> {
    let mut next = state.clone();
    next.attach_in_place(i, perturbation)?;
    Ok(next)
}

/// Draws the post-jump state.
pub fn sample_jump<R: Rng + ?Sized>(state: &State, params: &ModelParams, rng: &mut R) -> Result<State> {
    state.check_against(params)?;
    let mut next = state.clone();
    next.jump_in_place(params, rng);
    Ok(next)
}

pub fn project(state: &State) -> AttachCount {
    AttachCount(state.attached_count())
}

/// A vector-valued function of the state.
#[allow(clippy::len_without_is_empty)]
pub trait Observable {
    /// Output dimension.
    fn len(&self) -> usize;

    fn eval_into(&self, state: &State, out: &mut [f64]);

    /// True when the output is affine in positions and centroid for fixed
    /// statuses, so that integrating against η reduces to evaluating at η̄.
    fn is_affine(&self) -> bool {
        false
    }

    fn eval(&self, state: &State) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(state, &mut out);
        out
    }
}

/// Scalar test functions used by the one-step oracle battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    Constant,
    Centroid(usize),
    SiteCoord {
        site: usize,
        axis: usize,
    },
    /// Indicator of `|ψ| = k`.
    CountIs(usize),
}

impl Probe {
    fn value(&self, state: &State) -> f64 {
        match *self {
            Probe::Constant => 1.0,
            Probe::Centroid(axis) => state.centroid[axis],
            Probe::SiteCoord { site, axis } => state.position(site)[axis],
            Probe::CountIs(k) => f64::from(u8::from(state.attached == k)),
        }
    }
}

impl Observable for Probe {
    fn len(&self) -> usize {
        1
    }

    fn eval_into(&self, state: &State, out: &mut [f64]) {
        out[0] = self.value(state);
    }

    fn is_affine(&self) -> bool {
        true
    }
}

impl Observable for [Probe] {
    fn len(&self) -> usize {
        <[Probe]>::len(self)
    }

    fn eval_into(&self, state: &State, out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(self) {
            *o = p.value(state);
        }
    }

    fn is_affine(&self) -> bool {
        true
    }
}

impl Observable for Vec<Probe> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn eval_into(&self, state: &State, out: &mut [f64]) {
        self.as_slice().eval_into(state, out);
    }

    fn is_affine(&self) -> bool {
        true
    }
}

/// Wraps a closure as an [`Observable`]; treated as non-affine unless
/// declared otherwise.
pub struct FnObservable<F> {
    len: usize,
    affine: bool,
    f: F,
}

impl<F: Fn(&State, &mut [f64])> FnObservable<F> {
    pub fn new(len: usize, f: F) -> Self {
        Self { len, affine: false, f }
    }

    pub fn assume_affine(mut self) -> Self {
        self.affine = true;
        self
    }
}

impl<F: Fn(&State, &mut [f64])> Observable for FnObservable<F> {
    fn len(&self) -> usize {
        self.len
    }

    fn eval_into(&self, state: &State, out: &mut [f64]) {
        (self.f)(state, out)
    }

    fn is_affine(&self) -> bool {
        self.affine
    }
}

/// How to integrate over the perturbation law in [`expect_one_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaQuadrature {
    /// Exact for affine observables: evaluates at the mean perturbation.
    AffineMean,
    /// Exact weighted sum for finite-support laws.
    Atoms,
    /// Monte Carlo average over `samples` perturbations.
    Sampled { samples: usize, seed: u64 },
}

/// Expected value of `f` after one jump from `state`:
/// `Σ_attached r_i f(D_i x) + Σ_detached r_i ∫ f(A_i(x, z)) dη(z)`.
pub fn expect_one_step<F: Observable + ?Sized>(
    f: &F,
    state: &State,
    params: &ModelParams,
    quadrature: EtaQuadrature,
) -> Result<Vec<f64>> {
    state.check_against(params)?;
    let probs = site_selection_probs(state.psi(), params)?;
    let m = f.len();
    let mut total = vec![0.0; m];
    let mut buf = vec![0.0; m];

    let atoms = match quadrature {
        EtaQuadrature::AffineMean if !f.is_affine() => {
            return Err(Error::QuadratureUnsupported("mean-perturbation rule needs an affine observable".into()))
        }
        EtaQuadrature::Atoms => match params.eta().atoms() {
            Some(a) => a,
            None => {
                return Err(Error::QuadratureUnsupported("atom rule needs a finite-support perturbation law".into()))
            }
        },
        EtaQuadrature::Sampled { samples: 0, .. } => {
            return Err(Error::QuadratureUnsupported("sample rule needs ≥ 1 sample".into()))
        }
        _ => Vec::new(),
    };
    let mut rng = match quadrature {
        EtaQuadrature::Sampled { seed, .. } => Some(make_rng(seed)),
        _ => None,
    };

    for (i, &r) in probs.iter().enumerate() {
        if state.is_attached(i) {
            let next = detach(state, i)?;
            f.eval_into(&next, &mut buf);
            axpy(&mut total, r, &buf);
            continue;
        }
        match quadrature {
            EtaQuadrature::AffineMean => {
                let next = attach(state, i, params.eta_mean())?;
                f.eval_into(&next, &mut buf);
                axpy(&mut total, r, &buf);
            }
            EtaQuadrature::Atoms => {
                for (w, z) in &atoms {
                    let next = attach(state, i, z)?;
                    f.eval_into(&next, &mut buf);
                    axpy(&mut total, r * w, &buf);
                }
            }
            EtaQuadrature::Sampled { samples, .. } => {
                let rng = rng.as_mut().expect("rng for sampled rule");
                let weight = r / samples as f64;
                let mut z = vec![0.0; params.dim()];
                for _ in 0..samples {
                    params.eta().sample_into(rng, &mut z);
                    let next = attach(state, i, &z)?;
                    f.eval_into(&next, &mut buf);
                    axpy(&mut total, weight, &buf);
                }
            }
        }
    }
    Ok(total)
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (y, x) in acc.iter_mut().zip(x) {
        *y += a * x;
    }
}

//! Random sources and the sampling distributions used by the engines.
//!
//! All randomness flows from a [`SimRng`] passed in by the caller. Ensemble
//! member `i` of a run seeded with `s` draws from [`substream(s, i)`], so
//! its trajectory depends on nothing but `(s, i)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{ensure_dim, Error, Result};

pub type SimRng = ChaCha8Rng;

pub fn make_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` of the generator family keyed by `seed`.
pub fn substream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
enum EtaShape {
    UniformBox { center: Vec<f64>, half_width: Vec<f64> },
    PointMass(Vec<f64>),
    Mixture { cumulative: Vec<f64>, weights: Vec<f64>, atoms: Vec<Vec<f64>> },
}

/// Law of the offset of a newly attached site from the current centroid.
///
/// Every variant has compact support; `support_radius` is an ∞-norm bound
/// that no sample exceeds.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationDistribution {
    shape: EtaShape,
    mean: Vec<f64>,
    support_radius: f64,
}

impl PerturbationDistribution {
    /// Uniform on the axis-aligned box `center ± half_width`.
    pub fn uniform_box(center: Vec<f64>, half_width: Vec<f64>) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidParameter("perturbation dimension must be ≥ 1".into()));
        }
        ensure_dim(center.len(), half_width.len())?;
        if center.iter().chain(&half_width).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("uniform box must be finite".into()));
        }
        if half_width.iter().any(|&h| h < 0.0) {
            return Err(Error::InvalidParameter("half-widths must be nonnegative".into()));
        }
        let support_radius = center.iter().zip(&half_width).map(|(c, h)| c.abs() + h).fold(0.0, f64::max);
        Ok(Self { mean: center.clone(), shape: EtaShape::UniformBox { center, half_width }, support_radius })
    }

    pub fn point_mass(at: Vec<f64>) -> Result<Self> {
        if at.is_empty() {
            return Err(Error::InvalidParameter("perturbation dimension must be ≥ 1".into()));
        }
        if at.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("point mass must be finite".into()));
        }
        Ok(Self { support_radius: inf_norm(&at), mean: at.clone(), shape: EtaShape::PointMass(at) })
    }

    /// Finite mixture of point masses. Weights need not be normalized.
    pub fn mixture(atoms: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let Some(dim) = atoms.first().map(|(_, v)| v.len()) else {
            return Err(Error::InvalidParameter("mixture needs at least one atom".into()));
        };
        if dim == 0 {
            return Err(Error::InvalidParameter("perturbation dimension must be ≥ 1".into()));
        }
        let mut total = 0.0;
        for (w, v) in &atoms {
            ensure_dim(dim, v.len())?;
            if !(w.is_finite() && *w >= 0.0) || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("mixture atoms must be finite with weight ≥ 0".into()));
            }
            total += w;
        }
        if total <= 0.0 {
            return Err(Error::InvalidParameter("mixture weights sum to zero".into()));
        }
        let weights: Vec<f64> = atoms.iter().map(|(w, _)| w / total).collect();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;

        let mut mean = vec![0.0; dim];
        for (w, (_, v)) in weights.iter().zip(&atoms) {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += w * x;
            }
        }
        let support_radius =
            atoms.iter().zip(&weights).filter(|(_, &w)| w > 0.0).map(|((_, v), _)| inf_norm(v)).fold(0.0, f64::max);
        Ok(Self {
            shape: EtaShape::Mixture { cumulative, weights, atoms: atoms.into_iter().map(|(_, v)| v).collect() },
            mean,
            support_radius,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Analytic mean η̄.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// Weighted atoms when the law has finite support, `None` otherwise.
    pub fn atoms(&self) -> Option<Vec<(f64, &[f64])>> {
        match &self.shape {
            EtaShape::PointMass(v) => Some(vec![(1.0, v.as_slice())]),
            EtaShape::Mixture { weights, atoms, .. } => {
                Some(weights.iter().zip(atoms).map(|(w, v)| (*w, v.as_slice())).collect())
            }
            EtaShape::UniformBox { .. } => None,
        }
    }

    /// Writes one sample into `out`, which must have length `dim()`.
    #[inline]
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        match &self.shape {
            EtaShape::UniformBox { center, half_width } => {
                for ((o, c), h) in out.iter_mut().zip(center).zip(half_width) {
                    let u: f64 = rng.random();
                    *o = c + h * (2.0 * u - 1.0);
                }
            }
            EtaShape::PointMass(v) => out.copy_from_slice(v),
            EtaShape::Mixture { cumulative, atoms, .. } => {
                let u: f64 = rng.random();
                let k = cumulative.partition_point(|&c| c <= u).min(atoms.len() - 1);
                out.copy_from_slice(&atoms[k]);
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }
}

pub fn sample_perturbation<R: Rng + ?Sized>(dist: &PerturbationDistribution, rng: &mut R) -> Vec<f64> {
    dist.sample(rng)
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Number of grid points in the continuous-Poisson inverse-CDF table.
pub const CONTINUOUS_POISSON_TABLE: usize = 10_000;

/// Continuous law on `[0, x_max]` with density proportional to
/// `λ^x e^{-λ} / Γ(x + 1)`; rounded samples are close to Poisson(λ).
///
/// Parameterized by its mean: λ is solved so that the tabulated law has
/// exactly the requested mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousPoisson {
    mean: f64,
    lambda: f64,
    step: f64,
    cdf: Vec<f64>,
}

impl ContinuousPoisson {
    pub fn with_mean(mean: f64) -> Result<Self> {
        if !(mean.is_finite() && mean >= 0.1) {
            return Err(Error::InvalidParameter(format!(
                "continuous Poisson mean must be finite and ≥ 0.1, got {mean}"
            )));
        }
        let (mut lo, mut hi) = (1e-6_f64, 2.0 * mean + 10.0);
        if Self::tabulate(lo).table_mean() > mean || Self::tabulate(hi).table_mean() < mean {
            return Err(Error::InvalidParameter(format!("cannot bracket continuous Poisson rate for mean {mean}")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if Self::tabulate(mid).table_mean() < mean {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * hi {
                break;
            }
        }
        let mut table = Self::tabulate(0.5 * (lo + hi));
        table.mean = table.table_mean();
        Ok(table)
    }

    fn tabulate(lambda: f64) -> Self {
        let x_max = lambda + 15.0 * lambda.sqrt() + 30.0;
        let step = x_max / (CONTINUOUS_POISSON_TABLE - 1) as f64;
        let ln_lambda = lambda.ln();
        let log_density: Vec<f64> = (0..CONTINUOUS_POISSON_TABLE)
            .map(|j| {
                let x = j as f64 * step;
                x * ln_lambda - lambda - ln_gamma(x + 1.0)
            })
            .collect();
        let peak = log_density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let density: Vec<f64> = log_density.iter().map(|l| (l - peak).exp()).collect();
        let mut cdf = Vec::with_capacity(CONTINUOUS_POISSON_TABLE);
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in density.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * step;
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        *cdf.last_mut().unwrap() = 1.0;
        Self { mean: f64::NAN, lambda, step, cdf }
    }

    /// Mean of the piecewise-uniform law the table actually samples.
    fn table_mean(&self) -> f64 {
        self.cdf.windows(2).enumerate().map(|(j, w)| (w[1] - w[0]) * (j as f64 + 0.5) * self.step).sum()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Inverse-CDF lookup with linear interpolation.
    pub fn quantile(&self, u: f64) -> f64 {
        let j = self.cdf.partition_point(|&c| c <= u).saturating_sub(1).min(self.cdf.len() - 2);
        let (lo, hi) = (self.cdf[j], self.cdf[j + 1]);
        let frac = ((u - lo) / (hi - lo)).clamp(0.0, 1.0);
        (j as f64 + frac) * self.step
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random())
    }
}

/// Wait-time law for one site's next status change.
#[derive(Debug, Clone, PartialEq)]
pub enum WaitDistribution {
    Exponential {
        rate: f64,
    },
    /// Normal(location, scale) conditioned on being nonnegative.
    TruncatedNormal {
        location: f64,
        scale: f64,
    },
    ContinuousPoisson(Arc<ContinuousPoisson>),
    /// Deterministic wait. Useful for tests with predictable event times.
    Fixed(f64),
}

impl WaitDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidParameter(format!("exponential rate must be > 0, got {rate}")));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn truncated_normal(location: f64, scale: f64) -> Result<Self> {
        if !(location.is_finite() && scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "truncated normal needs finite location and scale > 0, got ({location}, {scale})"
            )));
        }
        // rejection sampling; keep the acceptance probability above ~3e-7
        if location < -5.0 * scale {
            return Err(Error::InvalidParameter(format!(
                "truncated normal location {location} is too far below zero for scale {scale}"
            )));
        }
        Ok(Self::TruncatedNormal { location, scale })
    }

    pub fn continuous_poisson(mean: f64) -> Result<Self> {
        Ok(Self::ContinuousPoisson(Arc::new(ContinuousPoisson::with_mean(mean)?)))
    }

    pub fn fixed(wait: f64) -> Result<Self> {
        if !(wait.is_finite() && wait > 0.0) {
            return Err(Error::InvalidParameter(format!("fixed wait must be > 0, got {wait}")));
        }
        Ok(Self::Fixed(wait))
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::TruncatedNormal { location, scale } => {
                let alpha = -location / scale;
                let pdf = (-0.5 * alpha * alpha).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let tail = 0.5 * erfc(alpha / std::f64::consts::SQRT_2);
                location + scale * pdf / tail
            }
            Self::ContinuousPoisson(cp) => cp.mean(),
            Self::Fixed(w) => *w,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exponential",
            Self::TruncatedNormal { .. } => "truncated_normal",
            Self::ContinuousPoisson(_) => "continuous_poisson",
            Self::Fixed(_) => "fixed",
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exponential { rate } => {
                let g: f64 = Exp1.sample(rng);
                g / rate
            }
            Self::TruncatedNormal { location, scale } => loop {
                let z: f64 = StandardNormal.sample(rng);
                let t = location + scale * z;
                if t >= 0.0 {
                    break t;
                }
            },
            Self::ContinuousPoisson(cp) => cp.sample(rng),
            Self::Fixed(w) => *w,
        }
    }
}

pub fn sample_wait<R: Rng + ?Sized>(dist: &WaitDistribution, rng: &mut R) -> f64 {
    dist.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{chi_square_gof, mean_and_se};
    use statrs::distribution::{Discrete, Poisson};

    #[test]
    fn point_mass_always_returns_its_atom() {
        let eta = PerturbationDistribution::point_mass(vec![0.5, -2.0]).unwrap();
        let mut rng = make_rng(1);
        for _ in 0..100 {
            assert_eq!(eta.sample(&mut rng), vec![0.5, -2.0]);
        }
        assert_eq!(eta.support_radius(), 2.0);
    }

    #[test]
    fn uniform_box_mean_and_support() {
        let eta = PerturbationDistribution::uniform_box(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(eta.support_radius(), 2.0);
        let mut rng = make_rng(7);
        let mut xs = vec![Vec::new(); 2];
        for _ in 0..100_000 {
            let s = eta.sample(&mut rng);
            assert!(inf_norm(&s) <= eta.support_radius());
            for (d, v) in s.into_iter().enumerate() {
                xs[d].push(v);
            }
        }
        for col in &xs {
            let (m, se) = mean_and_se(col);
            assert!((m - 1.0).abs() <= 4.0 * se, "mean {m} se {se}");
        }
    }

    #[test]
    fn mixture_normalizes_weights() {
        let eta = PerturbationDistribution::mixture(vec![(1.0, vec![2.0]), (3.0, vec![-2.0])]).unwrap();
        assert_eq!(eta.mean(), &[-1.0]);
        let atoms = eta.atoms().unwrap();
        assert_eq!(atoms[0].0, 0.25);
        assert_eq!(atoms[1].0, 0.75);
        assert!(PerturbationDistribution::mixture(vec![]).is_err());
        assert!(PerturbationDistribution::mixture(vec![(0.0, vec![1.0])]).is_err());
    }

    #[test]
    fn invalid_boxes_rejected() {
        assert!(PerturbationDistribution::uniform_box(vec![0.0], vec![-1.0]).is_err());
        assert!(PerturbationDistribution::uniform_box(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(PerturbationDistribution::uniform_box(vec![], vec![]).is_err());
    }

    #[test]
    fn exponential_mean_is_reciprocal_rate() {
        let w = WaitDistribution::exponential(1.0 / 20.0).unwrap();
        let mut rng = make_rng(3);
        let xs: Vec<f64> = (0..100_000).map(|_| w.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&x| x >= 0.0));
        let (m, se) = mean_and_se(&xs);
        assert!((m - 20.0).abs() <= 4.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn exponential_is_memoryless() {
        let w = WaitDistribution::exponential(0.5).unwrap();
        let mut rng = make_rng(11);
        let xs: Vec<f64> = (0..200_000).map(|_| w.sample(&mut rng)).collect();
        let (s, t) = (1.0, 1.5);
        let beyond_s: Vec<f64> = xs.iter().filter(|&&x| x > s).copied().collect();
        let cond: Vec<f64> = beyond_s.iter().map(|&x| f64::from(u8::from(x > s + t))).collect();
        let uncond: Vec<f64> = xs.iter().map(|&x| f64::from(u8::from(x > t))).collect();
        let (pc, sec) = mean_and_se(&cond);
        let (pu, seu) = mean_and_se(&uncond);
        assert!((pc - pu).abs() <= 4.0 * (sec * sec + seu * seu).sqrt());
    }

    #[test]
    fn truncated_normal_is_nonnegative_with_expected_mean() {
        let w = WaitDistribution::truncated_normal(60.0, 1.0).unwrap();
        assert!((w.mean() - 60.0).abs() < 1e-12);
        let mut rng = make_rng(5);
        let xs: Vec<f64> = (0..100_000).map(|_| w.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&x| x >= 0.0));
        let (m, se) = mean_and_se(&xs);
        assert!((m - 60.0).abs() <= 4.0 * se);

        // truncation matters near zero
        let near = WaitDistribution::truncated_normal(0.0, 1.0).unwrap();
        let half_normal_mean = (2.0 / std::f64::consts::PI).sqrt();
        assert!((near.mean() - half_normal_mean).abs() < 1e-12);
        let ys: Vec<f64> = (0..100_000).map(|_| near.sample(&mut rng)).collect();
        assert!(ys.iter().all(|&x| x >= 0.0));
        let (m, se) = mean_and_se(&ys);
        assert!((m - half_normal_mean).abs() <= 4.0 * se);
        assert!(WaitDistribution::truncated_normal(-10.0, 1.0).is_err());
    }

    #[test]
    fn continuous_poisson_hits_requested_mean() {
        for mean in [1.0, 20.0, 60.0] {
            let cp = ContinuousPoisson::with_mean(mean).unwrap();
            assert!((cp.mean() - mean).abs() < 1e-9, "{mean}: {}", cp.mean());
            assert!((cp.lambda() - mean).abs() < 0.5);
        }
        assert!(ContinuousPoisson::with_mean(0.0).is_err());
    }

    #[test]
    fn continuous_poisson_rounds_to_poisson() {
        let w = WaitDistribution::continuous_poisson(20.0).unwrap();
        let mut rng = make_rng(17);
        let n = 100_000;
        let mut counts = vec![0u64; 80];
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            let x = w.sample(&mut rng);
            assert!(x >= 0.0);
            xs.push(x);
            counts[(x.round() as usize).min(79)] += 1;
        }
        let (m, se) = mean_and_se(&xs);
        assert!((m - 20.0).abs() <= 4.0 * se);

        let pois = Poisson::new(20.0).unwrap();
        let mut probs: Vec<f64> = (0..80).map(|k| pois.pmf(k as u64)).collect();
        let tail: f64 = 1.0 - probs.iter().sum::<f64>();
        *probs.last_mut().unwrap() += tail;
        let test = chi_square_gof(&counts, &probs, 5.0);
        assert!(test.p_value > 0.01, "{test:?}");
    }

    #[test]
    fn substreams_are_stable_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(substream(9, 3), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(substream(9, 3), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(substream(9, 4), |r, _| Some(r.random())).collect();
        let d: Vec<u64> = (0..4).map(|_| 0).scan(substream(10, 3), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}

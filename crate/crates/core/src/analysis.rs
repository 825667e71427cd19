//! Closed-form results for the centroid model and the estimators that
//! compare simulations against them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_len, Error, Result};
use crate::model::ModelParams;
use crate::simulator::{PathRecord, Trajectory, TrajectorySummary};
use crate::stats::mean_and_se;

/// Tolerance for the path-wise growth and movement bounds.
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// Probability vector over attached counts `0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    probs: Vec<f64>,
}

impl CountDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("count distribution needs at least one entry".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameter("probabilities must be finite and ≥ 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Normalized histogram of counts.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidParameter("empty histogram".into()));
        }
        Self::new(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest count `n`.
    pub fn n(&self) -> usize {
        self.probs.len() - 1
    }
}

/// Stationary law of the attached count: Binomial(n, θ_a / (θ_a + θ_d)).
///
/// Computed in log space so large `n` neither overflows nor underflows
/// before the final exponentiation.
pub fn steady_state(n: usize, theta_a: f64, theta_d: f64) -> Result<CountDistribution> {
    check_rates(n, theta_a, theta_d)?;
    let total = theta_a + theta_d;
    let ln_p = (theta_a / total).ln();
    let ln_q = (theta_d / total).ln();
    let mut ln_choose = 0.0;
    let mut probs = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            ln_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        probs.push((ln_choose + k as f64 * ln_p + (n - k) as f64 * ln_q).exp());
    }
    Ok(CountDistribution { probs })
}

fn check_rates(n: usize, theta_a: f64, theta_d: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be ≥ 1".into()));
    }
    if !(theta_a.is_finite() && theta_a > 0.0 && theta_d.is_finite() && theta_d > 0.0) {
        return Err(Error::InvalidParameter(format!("rates must be finite and > 0, got ({theta_a}, {theta_d})")));
    }
    Ok(())
}

/// Largest absolute imbalance in the stationarity equations of the count
/// chain's generator. Zero exactly at the stationary law.
pub fn invariance_check(dist: &CountDistribution, n: usize, theta_a: f64, theta_d: f64) -> Result<f64> {
    check_rates(n, theta_a, theta_d)?;
    ensure_len(n + 1, dist.probs.len())?;
    let p = &dist.probs;
    let residual = (0..=n)
        .map(|k| {
            let from_below = if k > 0 { theta_a * (n - k + 1) as f64 * p[k - 1] } else { 0.0 };
            let from_above = if k < n { theta_d * (k + 1) as f64 * p[k + 1] } else { 0.0 };
            let outflow = (theta_d * k as f64 + theta_a * (n - k) as f64) * p[k];
            (from_below + from_above - outflow).abs()
        })
        .fold(0.0, f64::max);
    Ok(residual)
}

/// Velocity of the expected centroid at stationarity:
/// `η̄ θ_d ((θ_d + θ_a)^n − θ_d^n) / (θ_d + θ_a)^n`.
pub fn expected_velocity(params: &ModelParams) -> Vec<f64> {
    let (ta, td) = (params.theta_a(), params.theta_d());
    // 1 − (θ_d/(θ_a+θ_d))^n without cancellation
    let attached_share = -(params.n() as f64 * (-ta / (ta + td)).ln_1p()).exp_m1();
    params.eta_mean().iter().map(|m| m * td * attached_share).collect()
}

/// The same velocity as the stationary-weighted attachment drift
/// `Σ_{i<n} σ(i) θ_a (n − i) η̄ / (i + 1)`, summed term by term.
pub fn drift_oracle(params: &ModelParams) -> Vec<f64> {
    let n = params.n();
    let sigma = steady_state(n, params.theta_a(), params.theta_d()).expect("validated params");
    let scale: f64 = (0..n).map(|i| sigma.probs[i] * params.theta_a() * (n - i) as f64 / (i + 1) as f64).sum();
    params.eta_mean().iter().map(|m| m * scale).collect()
}

/// Ensemble-mean centroid velocity over a measurement window.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityEstimate {
    /// Length per second, per coordinate.
    pub mean_velocity: Vec<f64>,
    pub standard_error: Vec<f64>,
    /// `(start, end)` in seconds.
    pub window: (f64, f64),
    pub ensemble_size: usize,
}

/// Mean and standard error of `(centroid(end) − centroid(start)) / (end − start)`
/// across the ensemble.
pub fn estimate_velocity<S: PathRecord>(records: &[S], burn_in: f64, window_end: f64) -> Result<VelocityEstimate> {
    if !(window_end > burn_in && burn_in >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "window must satisfy 0 ≤ start < end, got ({burn_in}, {window_end})"
        )));
    }
    if records.is_empty() {
        return Err(Error::InvalidParameter("no trajectories to estimate from".into()));
    }
    let span = window_end - burn_in;
    let mut per_axis: Vec<Vec<f64>> = Vec::new();
    for r in records {
        if r.horizon() < window_end {
            return Err(Error::InsufficientHorizon { horizon: r.horizon(), required: window_end });
        }
        let start = r.centroid_at(burn_in)?;
        let end = r.centroid_at(window_end)?;
        if per_axis.is_empty() {
            per_axis = vec![Vec::with_capacity(records.len()); start.len()];
        }
        ensure_len(per_axis.len(), end.len())?;
        for (axis, (a, b)) in per_axis.iter_mut().zip(start.iter().zip(end)) {
            axis.push((b - a) / span);
        }
    }
    let (mean_velocity, standard_error) = per_axis.iter().map(|xs| mean_and_se(xs)).unzip();
    Ok(VelocityEstimate { mean_velocity, standard_error, window: (burn_in, window_end), ensemble_size: records.len() })
}

/// Histogram of attached counts at time `t` across the ensemble.
pub fn empirical_count_distribution<S: PathRecord>(records: &[S], n: usize, t: f64) -> Result<CountDistribution> {
    let mut counts = vec![0u64; n + 1];
    for r in records {
        let k = r.count_at(t)?;
        if k > n {
            return Err(Error::IndexOutOfRange { index: k, n: n + 1 });
        }
        counts[k] += 1;
    }
    CountDistribution::from_counts(&counts)
}

/// Ensemble average of each member's time-averaged count occupancy. A
/// diagnostic only; convergence is judged at fixed times.
pub fn mean_occupancy(summaries: &[TrajectorySummary]) -> Result<CountDistribution> {
    let Some(first) = summaries.first() else {
        return Err(Error::InvalidParameter("no summaries".into()));
    };
    let mut acc = vec![0.0; first.occupancy.len()];
    for s in summaries {
        ensure_len(acc.len(), s.occupancy.len())?;
        for (a, o) in acc.iter_mut().zip(&s.occupancy) {
            *a += o;
        }
    }
    let total: f64 = acc.iter().sum();
    CountDistribution::new(acc.into_iter().map(|a| a / total).collect())
}

/// Total variation distance, `½ Σ |a_k − b_k|`.
pub fn tv_distance(a: &CountDistribution, b: &CountDistribution) -> Result<f64> {
    ensure_len(a.probs.len(), b.probs.len())?;
    Ok(0.5 * a.probs.iter().zip(&b.probs).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    /// `g(Y_{k+1}) > g(Y_k) + R`.
    Growth { k: usize, excess: f64 },
    /// `|c(Y_{k2}) − c(Y_{k1})|_∞ > 2 g(Y_0) + (k1 + k2) R`.
    Movement { k1: usize, k2: usize, excess: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GrowthReport {
    pub violations: Vec<Violation>,
    pub pairs_checked: usize,
    /// Largest centroid-constraint residual seen along the path.
    pub max_centroid_residual: f64,
}

impl GrowthReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the one-step growth bound on every consecutive pair and the
/// centroid movement bound on all pairs `(0, k)` plus a seeded random
/// sample of `4 · len` index pairs.
pub fn check_growth_bounds(traj: &Trajectory, params: &ModelParams) -> GrowthReport {
    let states = traj.states();
    let radius = params.support_radius();
    let g: Vec<f64> = states.iter().map(|s| s.growth_norm()).collect();
    let mut report = GrowthReport {
        max_centroid_residual: states.iter().map(|s| s.centroid_residual()).fold(0.0, f64::max),
        ..Default::default()
    };

    for (k, w) in g.windows(2).enumerate() {
        let excess = w[1] - (w[0] + radius);
        if excess > BOUND_TOLERANCE {
            report.violations.push(Violation::Growth { k, excess });
        }
        report.pairs_checked += 1;
    }

    let movement = |k1: usize, k2: usize, report: &mut GrowthReport| {
        let (a, b) = (states[k1].centroid(), states[k2].centroid());
        let dist = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let bound = 2.0 * g[0] + (k1 + k2) as f64 * radius;
        if dist - bound > BOUND_TOLERANCE {
            report.violations.push(Violation::Movement { k1, k2, excess: dist - bound });
        }
        report.pairs_checked += 1;
    };
    for k in 1..states.len() {
        movement(0, k, &mut report);
    }
    if states.len() > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6d6f_7665 ^ states.len() as u64);
        for _ in 0..4 * states.len() {
            let k1 = rng.random_range(0..states.len());
            let k2 = rng.random_range(0..states.len());
            movement(k1, k2, &mut report);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::State;
    use crate::stochastic::PerturbationDistribution;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params_with_mean(theta_a: f64, theta_d: f64, n: usize, mean: Vec<f64>) -> ModelParams {
        let hw = vec![1.0; mean.len()];
        let eta = PerturbationDistribution::uniform_box(mean, hw).unwrap();
        ModelParams::new(theta_a, theta_d, n, eta).unwrap()
    }

    #[test]
    fn steady_state_examples() {
        let s = steady_state(2, 0.3, 0.3).unwrap();
        for (a, b) in s.probs().iter().zip([0.25, 0.5, 0.25]) {
            assert_relative_eq!(*a, b, max_relative = 1e-14);
        }
        let s = steady_state(1, 0.05, 0.2).unwrap();
        assert_relative_eq!(s.probs()[0], 0.8, max_relative = 1e-14);
        assert_relative_eq!(s.probs()[1], 0.2, max_relative = 1e-14);
        assert!(steady_state(0, 0.1, 0.1).is_err());
        assert!(steady_state(3, -0.1, 0.1).is_err());
    }

    #[test]
    fn steady_state_large_n_is_finite() {
        let s = steady_state(5000, 1e-3, 7.0).unwrap();
        assert!(s.probs().iter().all(|p| p.is_finite()));
        assert!((s.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invariance_residual_examples() {
        let sigma = steady_state(6, 0.05, 0.2).unwrap();
        assert!(invariance_check(&sigma, 6, 0.05, 0.2).unwrap() <= 1e-12);
        let uniform = CountDistribution::new(vec![1.0 / 3.0; 3]).unwrap();
        assert!(invariance_check(&uniform, 2, 0.05, 0.2).unwrap() > 1e-3);
        // n = 1: zero exactly at (θ_d, θ_a)/(θ_a + θ_d)
        let two = CountDistribution::new(vec![0.8, 0.2]).unwrap();
        assert!(invariance_check(&two, 1, 0.05, 0.2).unwrap() <= 1e-15);
        let off = CountDistribution::new(vec![0.7, 0.3]).unwrap();
        assert!(invariance_check(&off, 1, 0.05, 0.2).unwrap() > 1e-3);
        assert!(invariance_check(&two, 2, 0.05, 0.2).is_err());
    }

    #[test]
    fn expected_velocity_examples() {
        let zero = params_with_mean(0.05, 0.2, 5, vec![0.0, 0.0]);
        assert_eq!(expected_velocity(&zero), vec![0.0, 0.0]);

        let one = params_with_mean(0.05, 0.2, 1, vec![1.0, -2.0]);
        let v = expected_velocity(&one);
        let closed = 0.05 * 0.2 / 0.25;
        assert_relative_eq!(v[0], closed, max_relative = 1e-14);
        assert_relative_eq!(v[1], -2.0 * closed, max_relative = 1e-14);

        for n in [1, 2, 5, 12] {
            let eq = params_with_mean(0.1, 0.1, n, vec![1.5]);
            let expect = 1.5 * 0.1 * (1.0 - 0.5f64.powi(n as i32));
            assert_relative_eq!(expected_velocity(&eq)[0], expect, max_relative = 1e-14);
        }
    }

    #[test]
    fn drift_oracle_examples() {
        let one = params_with_mean(0.05, 0.2, 1, vec![1.0]);
        assert_relative_eq!(drift_oracle(&one)[0], (0.2 / 0.25) * 0.05, max_relative = 1e-14);
        // θ_d → 0: σ concentrates on n, nothing left to attach
        let tiny = params_with_mean(0.05, 1e-12, 8, vec![1.0]);
        assert!(drift_oracle(&tiny)[0] < 1e-10);
        assert!(expected_velocity(&tiny)[0] < 1e-10);
    }

    #[test]
    fn tv_examples() {
        let a = CountDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        let lo = CountDistribution::new(vec![1.0, 0.0, 0.0]).unwrap();
        let hi = CountDistribution::new(vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(tv_distance(&lo, &hi).unwrap(), 1.0);
        let x = CountDistribution::new(vec![1.0, 0.0]).unwrap();
        let y = CountDistribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(tv_distance(&x, &y).unwrap(), 0.5);
        assert!(tv_distance(&x, &a).is_err());
    }

    #[test]
    fn count_distribution_validation() {
        assert!(CountDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(CountDistribution::new(vec![-0.1, 1.1]).is_err());
        assert!(CountDistribution::new(vec![]).is_err());
        assert!(CountDistribution::from_counts(&[0, 0]).is_err());
    }

    #[test]
    fn identical_trajectories_have_zero_se() {
        let p = params_with_mean(0.05, 0.05, 3, vec![1.0, 1.0]);
        let init = State::all_attached(3, &[0.0, 0.0]).unwrap();
        let t = crate::simulator::simulate_markov(&p, init, 1000.0, crate::stochastic::make_rng(4)).unwrap();
        let copies = vec![t.clone(), t.clone(), t];
        let est = estimate_velocity(&copies, 100.0, 900.0).unwrap();
        assert_eq!(est.standard_error, vec![0.0, 0.0]);
        assert_eq!(est.ensemble_size, 3);
        assert!(matches!(estimate_velocity(&copies, 100.0, 2000.0), Err(Error::InsufficientHorizon { .. })));
        assert!(estimate_velocity(&copies, 500.0, 100.0).is_err());
    }

    #[test]
    fn growth_check_single_state_is_clean() {
        let p = params_with_mean(0.05, 0.05, 2, vec![1.0]);
        let s = State::all_attached(2, &[0.0]).unwrap();
        let t = Trajectory::from_parts(vec![0.0], vec![s], 1.0).unwrap();
        let r = check_growth_bounds(&t, &p);
        assert!(r.is_clean());
    }

    #[test]
    fn growth_check_flags_oversized_jump() {
        let p = params_with_mean(0.05, 0.05, 3, vec![0.0]);
        let radius = p.support_radius();
        let s0 = State::new(vec![true, true, false], vec![vec![0.0], vec![0.0], vec![0.0]], vec![0.0]).unwrap();
        // site 2 (detached) jumps by 2R while site 0 detaches
        let s1 =
            State::new(vec![false, true, false], vec![vec![0.0], vec![0.0], vec![2.0 * radius]], vec![0.0]).unwrap();
        let t = Trajectory::from_parts(vec![0.0, 1.0], vec![s0, s1], 1.0).unwrap();
        let r = check_growth_bounds(&t, &p);
        let growth: Vec<_> = r.violations.iter().filter(|v| matches!(v, Violation::Growth { .. })).collect();
        assert_eq!(growth.len(), 1);
        assert!(matches!(growth[0], Violation::Growth { k: 0, .. }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn velocity_linear_in_mean(ta in 1e-3f64..1.0, td in 1e-3f64..1.0, n in 1usize..64, m in -5.0f64..5.0) {
            let a = params_with_mean(ta, td, n, vec![m]);
            let b = params_with_mean(ta, td, n, vec![2.0 * m]);
            prop_assert_eq!(2.0 * expected_velocity(&a)[0], expected_velocity(&b)[0]);
        }

        #[test]
        fn velocity_nondecreasing_in_n(ta in 1e-3f64..1.0, td in 1e-3f64..1.0, n in 1usize..63) {
            let a = params_with_mean(ta, td, n, vec![1.0, 0.5]);
            let b = params_with_mean(ta, td, n + 1, vec![1.0, 0.5]);
            let (va, vb) = (expected_velocity(&a), expected_velocity(&b));
            prop_assert!(vb[0] >= va[0] && vb[1] >= va[1]);
        }

        #[test]
        fn steady_state_sums_to_one(ta in 1e-4f64..10.0, td in 1e-4f64..10.0, n in 1usize..200) {
            let s = steady_state(n, ta, td).unwrap();
            prop_assert!((s.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(CountDistribution::new(s.probs().to_vec()).is_ok());
        }
    }
}

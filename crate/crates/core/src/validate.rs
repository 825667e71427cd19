//! The acceptance battery: eight criteria, each runnable at a quick smoke
//! scale or at full scale.

use std::fmt;
use std::time::{Duration, Instant};

use rand::Rng;

use crate::analysis::{
    check_growth_bounds, drift_oracle, empirical_count_distribution, expected_velocity, invariance_check, steady_state,
    tv_distance,
};
use crate::cli::{run_sweep, write_aggregate_csv, AggregateRow};
use crate::config::{EngineSpec, EtaSpec, ExperimentConfig, InitialSpec, ModelSpec, OneOrMany, OutputSpec, WaitSpec};
use crate::error::{Error, Result};
use crate::model::{EtaQuadrature, ModelParams, Observable, Probe, State};
use crate::simulator::{
    simulate_ensemble, Engine, EnsembleSpec, MarkovProcess, SemiMarkovConfig, SemiMarkovProcess, Trajectory,
};
use crate::stats::{chi_square_homogeneity, ks_two_sample, mean_and_se, TestOutcome};
use crate::stochastic::{substream, PerturbationDistribution, WaitDistribution};

pub const DEFAULT_SEED: u64 = 2026;
const VELOCITY_SE_FACTOR: f64 = 3.0;
const VELOCITY_REL_TOL: f64 = 0.05;
const TV_LIMIT: f64 = 0.02;
const IDENTITY_TOL: f64 = 1e-12;
const ONE_STEP_SE_FACTOR: f64 = 4.0;
const SIGNIFICANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

impl Level {
    fn pick<T>(self, quick: T, full: T) -> T {
        match self {
            Level::Quick => quick,
            Level::Full => full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    VelocityMarkov,
    StationaryLaw,
    VelocityIdentity,
    OneStepOracle,
    PathBounds,
    SemiMarkovEquivalence,
    WaitLawSweep,
    Determinism,
}

impl Criterion {
    pub const ALL: [Criterion; 8] = [
        Criterion::VelocityMarkov,
        Criterion::StationaryLaw,
        Criterion::VelocityIdentity,
        Criterion::OneStepOracle,
        Criterion::PathBounds,
        Criterion::SemiMarkovEquivalence,
        Criterion::WaitLawSweep,
        Criterion::Determinism,
    ];

    pub fn number(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).expect("listed") + 1
    }

    pub fn title(self) -> &'static str {
        match self {
            Criterion::VelocityMarkov => "Markov velocity matches closed form",
            Criterion::StationaryLaw => "attached count reaches binomial steady state",
            Criterion::VelocityIdentity => "steady-state law and velocity identities",
            Criterion::OneStepOracle => "one-step expectations match the kernel",
            Criterion::PathBounds => "growth and movement bounds hold on every path",
            Criterion::SemiMarkovEquivalence => "exponential semi-Markov engine matches Markov engine",
            Criterion::WaitLawSweep => "wait-law sweep completes; exponential rows match theory",
            Criterion::Determinism => "fixed seed gives byte-identical output",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub criterion: Criterion,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {}: {} ({}; {:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion.number(),
            self.criterion.title(),
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Runs one criterion; errors count as failures. `bounds_params`, when
/// given, replaces the models used by the path-bound criterion.
pub fn run_criterion(
    criterion: Criterion,
    level: Level,
    seed: u64,
    bounds_params: Option<&ModelParams>,
) -> CriterionOutcome {
    let start = Instant::now();
    let result = match criterion {
        Criterion::VelocityMarkov => velocity_markov(level, seed),
        Criterion::StationaryLaw => stationary_law(level, seed),
        Criterion::VelocityIdentity => velocity_identity(),
        Criterion::OneStepOracle => one_step_oracle(level, seed),
        Criterion::PathBounds => path_bounds(level, seed, bounds_params),
        Criterion::SemiMarkovEquivalence => semi_markov_equivalence(level, seed),
        Criterion::WaitLawSweep => wait_law_sweep(level, seed),
        Criterion::Determinism => determinism(seed),
    };
    let (passed, detail) = match result {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionOutcome { criterion, passed, detail, elapsed: start.elapsed() }
}

pub fn run_all(level: Level, seed: u64, bounds_params: Option<&ModelParams>) -> Vec<CriterionOutcome> {
    Criterion::ALL.iter().map(|&c| run_criterion(c, level, seed, bounds_params)).collect()
}

type Verdict = Result<(bool, String)>;

fn unit_box_eta() -> EtaSpec {
    EtaSpec::UniformBox { center: Some(vec![1.0, 1.0]), half_width: OneOrMany::One(1.0) }
}

fn unit_box() -> PerturbationDistribution {
    PerturbationDistribution::uniform_box(vec![1.0, 1.0], vec![1.0, 1.0]).expect("valid box")
}

/// The exponential sweep over `n` and the detachment rate.
pub fn exponential_sweep_config(level: Level, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        ensemble_size: level.pick(200, 2000),
        horizon_h: 75.0,
        burn_in_h: 10.0,
        window_end_h: 75.0,
        model: ModelSpec {
            n: OneOrMany::Many(level.pick(vec![1, 4, 16], vec![1, 2, 4, 8, 16, 32])),
            theta_a: OneOrMany::One(0.05),
            theta_d: OneOrMany::Many(vec![0.2, 0.05, 0.0125]),
            dim: None,
            support_radius: None,
        },
        eta: Some(unit_box_eta()),
        engines: vec![EngineSpec::Markov],
        initial: InitialSpec::default(),
        output: OutputSpec::default(),
    }
}

/// The wait-law comparison: mean attach 20 s, mean detach 60 s.
pub fn wait_law_config(level: Level, seed: u64) -> ExperimentConfig {
    let engine = |attach: WaitSpec, detach: WaitSpec| EngineSpec::SemiMarkov {
        label: None,
        attach_wait: attach,
        detach_wait: detach,
    };
    ExperimentConfig {
        seed,
        ensemble_size: level.pick(200, 2000),
        horizon_h: 75.0,
        burn_in_h: 10.0,
        window_end_h: 75.0,
        model: ModelSpec {
            n: OneOrMany::Many(level.pick(vec![1, 5, 10], (1..=10).collect())),
            theta_a: OneOrMany::One(0.05),
            theta_d: OneOrMany::One(0.05),
            dim: None,
            support_radius: None,
        },
        eta: Some(unit_box_eta()),
        engines: vec![
            engine(WaitSpec::Exponential { mean_s: 20.0 }, WaitSpec::Exponential { mean_s: 60.0 }),
            engine(
                WaitSpec::TruncatedNormal { location_s: 20.0, scale_s: 1.0 },
                WaitSpec::TruncatedNormal { location_s: 60.0, scale_s: 1.0 },
            ),
            engine(WaitSpec::ContinuousPoisson { mean_s: 20.0 }, WaitSpec::ContinuousPoisson { mean_s: 60.0 }),
        ],
        initial: InitialSpec::default(),
        output: OutputSpec::default(),
    }
}

struct VelocityCheck {
    worst_z: f64,
    worst_rel: f64,
    failures: Vec<String>,
}

/// Every coordinate of every row within `3·SE` of theory, and within 5 %
/// of it where it is nonzero.
fn check_velocity_rows<'a>(rows: impl IntoIterator<Item = &'a AggregateRow>) -> VelocityCheck {
    let mut check = VelocityCheck { worst_z: 0.0, worst_rel: 0.0, failures: Vec::new() };
    for r in rows {
        for axis in 0..r.theory.len() {
            let diff = (r.estimate[axis] - r.theory[axis]).abs();
            let z = if r.standard_error[axis] > 0.0 {
                diff / r.standard_error[axis]
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            let rel = if r.theory[axis] != 0.0 { diff / r.theory[axis].abs() } else { 0.0 };
            check.worst_z = check.worst_z.max(z);
            check.worst_rel = check.worst_rel.max(rel);
            if z > VELOCITY_SE_FACTOR || rel > VELOCITY_REL_TOL {
                check.failures.push(format!(
                    "n={} θd={} axis {axis}: est {} theory {} (z {z:.2}, rel {rel:.4})",
                    r.n, r.theta_d, r.estimate[axis], r.theory[axis]
                ));
            }
        }
    }
    check
}

impl VelocityCheck {
    fn verdict(self, rows: usize) -> (bool, String) {
        let summary = format!("{rows} rows, worst z {:.2}, worst rel err {:.4}", self.worst_z, self.worst_rel);
        if self.failures.is_empty() {
            (true, summary)
        } else {
            (false, format!("{summary}; {}", self.failures.join("; ")))
        }
    }
}

fn velocity_markov(level: Level, seed: u64) -> Verdict {
    let rows = run_sweep(&exponential_sweep_config(level, seed), |_| Ok(()))?;
    Ok(check_velocity_rows(&rows).verdict(rows.len()))
}

fn stationary_law(level: Level, seed: u64) -> Verdict {
    let horizon = level.pick(1.0, 10.0) * 3600.0;
    let mut cases: Vec<(usize, f64)> =
        level.pick(vec![1, 4, 16], vec![1, 2, 4, 8, 16, 32]).into_iter().map(|n| (n, 0.05)).collect();
    cases.extend([(8, 0.2), (8, 0.0125)]);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (i, &(n, theta_d)) in cases.iter().enumerate() {
        let params = ModelParams::new(0.05, theta_d, n, unit_box())?;
        let spec = EnsembleSpec {
            initial: State::all_attached(n, &[0.0, 0.0])?,
            params,
            engine: Engine::Markov,
            horizon,
            count: 10_000,
            seed: crate::cli::point_seed(seed, i),
            probes: vec![horizon],
            retain_paths: None,
        };
        let summaries = simulate_ensemble(&spec)?;
        let empirical = empirical_count_distribution(&summaries, n, horizon)?;
        let tv = tv_distance(&empirical, &steady_state(n, 0.05, theta_d)?)?;
        worst = worst.max(tv);
        if tv >= TV_LIMIT {
            failures.push(format!("n={n} θd={theta_d}: tv {tv:.4}"));
        }
    }
    let summary = format!("{} cases at t={horizon} s, worst tv {worst:.4}", cases.len());
    Ok(if failures.is_empty() { (true, summary) } else { (false, format!("{summary}; {}", failures.join("; "))) })
}

fn velocity_identity() -> Verdict {
    let rates = [1e-3, 0.0125, 0.05, 0.2, 1.0, 20.0];
    let mut worst_inv: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    for n in 1..=50 {
        for &ta in &rates {
            for &td in &rates {
                let sigma = steady_state(n, ta, td)?;
                worst_inv = worst_inv.max(invariance_check(&sigma, n, ta, td)?);
                let params = ModelParams::new(ta, td, n, unit_box())?;
                for (a, b) in expected_velocity(&params).iter().zip(drift_oracle(&params)) {
                    worst_drift = worst_drift.max((a - b).abs() / a.abs().max(f64::MIN_POSITIVE));
                }
            }
        }
    }
    let passed = worst_inv <= IDENTITY_TOL && worst_drift <= IDENTITY_TOL;
    Ok((passed, format!("worst invariance residual {worst_inv:.2e}, worst drift rel diff {worst_drift:.2e}")))
}

/// A random state with a random model for the one-step battery.
fn random_case<R: Rng>(n: usize, rng: &mut R) -> Result<(State, ModelParams)> {
    let psi: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let positions: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
    let attached: Vec<&Vec<f64>> = positions.iter().zip(&psi).filter(|(_, &a)| a).map(|(p, _)| p).collect();
    let centroid: Vec<f64> = if attached.is_empty() {
        (0..2).map(|_| rng.random_range(-5.0..5.0)).collect()
    } else {
        (0..2).map(|d| attached.iter().map(|p| p[d]).sum::<f64>() / attached.len() as f64).collect()
    };
    let state = State::new(psi, positions, centroid)?;
    let center: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let half: Vec<f64> = (0..2).map(|_| rng.random_range(0.1..2.0)).collect();
    let eta = PerturbationDistribution::uniform_box(center, half)?;
    let params = ModelParams::new(rng.random_range(0.01..1.0), rng.random_range(0.01..1.0), n, eta)?;
    Ok((state, params))
}

fn one_step_oracle(level: Level, seed: u64) -> Verdict {
    let draws = level.pick(100_000, 1_000_000);
    let sizes = [1, 3, 8];
    let mut rng = substream(seed, 0);
    let mut worst_z: f64 = 0.0;
    let mut worst_kernel: f64 = 0.0;
    let mut failures = Vec::new();
    for case in 0..20 {
        let n = sizes[case % sizes.len()];
        let (state, params) = random_case(n, &mut rng)?;
        let mut battery = vec![Probe::Centroid(0), Probe::Centroid(1)];
        battery.extend((0..=n).map(Probe::CountIs));
        let oracle = crate::model::expect_one_step(&battery, &state, &params, EtaQuadrature::AffineMean)?;

        let k = state.attached_count();
        let (down, up) = params.count_transition(k);
        for j in 0..=n {
            let want = if j + 1 == k {
                down
            } else if j == k + 1 {
                up
            } else {
                0.0
            };
            let got = oracle[2 + j];
            worst_kernel = worst_kernel.max((got - want).abs());
            if (got - want).abs() > IDENTITY_TOL {
                failures.push(format!("case {case}: P(count={j}) oracle {got} kernel {want}"));
            }
        }

        let mut sims: Vec<Vec<f64>> = vec![Vec::with_capacity(draws); battery.len()];
        let mut scratch = state.clone();
        let mut buf = vec![0.0; battery.len()];
        for _ in 0..draws {
            scratch.clone_from(&state);
            scratch.jump_in_place(&params, &mut rng);
            battery.eval_into(&scratch, &mut buf);
            for (col, &v) in sims.iter_mut().zip(&buf) {
                col.push(v);
            }
        }
        for (j, col) in sims.iter().enumerate() {
            let (mean, se) = mean_and_se(col);
            let diff = (mean - oracle[j]).abs();
            let ok = if se > 0.0 { diff <= ONE_STEP_SE_FACTOR * se } else { diff <= IDENTITY_TOL };
            if se > 0.0 {
                worst_z = worst_z.max(diff / se);
            }
            if !ok {
                failures.push(format!("case {case} probe {j}: mean {mean} oracle {} se {se}", oracle[j]));
            }
        }
    }
    let summary = format!("20 states × {draws} draws, worst z {worst_z:.2}, worst kernel diff {worst_kernel:.1e}");
    Ok(if failures.is_empty() { (true, summary) } else { (false, format!("{summary}; {}", failures.join("; "))) })
}

fn path_bounds(level: Level, seed: u64, override_params: Option<&ModelParams>) -> Verdict {
    let trajectories = level.pick(100, 1000);
    let jumps = 10_000;
    let sizes = [1, 3, 8];
    let detach_rates = [0.2, 0.05, 0.0125];
    let mut violations = 0usize;
    let mut pairs = 0usize;
    let mut worst_residual: f64 = 0.0;
    let mut first = None;
    for t in 0..trajectories {
        let params = match override_params {
            Some(p) => p.clone(),
            None => ModelParams::new(0.05, detach_rates[t % 3], sizes[(t / 3) % 3], unit_box())?,
        };
        let initial = State::all_attached(params.n(), &vec![0.0; params.dim()])?;
        let rng = substream(seed, t as u64);
        let traj = if t % 2 == 0 {
            let mut p = MarkovProcess::new(&params, initial, rng)?;
            Trajectory::record_jumps(&mut p, jumps)
        } else {
            let waits = SemiMarkovConfig {
                attach_wait: WaitDistribution::truncated_normal(1.0 / params.theta_a(), 1.0)?,
                detach_wait: WaitDistribution::truncated_normal(1.0 / params.theta_d(), 1.0)?,
            };
            let mut p = SemiMarkovProcess::new(&params, &waits, initial, rng)?;
            Trajectory::record_jumps(&mut p, jumps)
        };
        let report = check_growth_bounds(&traj, &params);
        violations += report.violations.len();
        pairs += report.pairs_checked;
        worst_residual = worst_residual.max(report.max_centroid_residual);
        if first.is_none() {
            first = report.violations.first().map(|v| format!("trajectory {t}: {v:?}"));
        }
    }
    let residual_ok = worst_residual <= crate::model::CENTROID_TOLERANCE;
    let mut detail = format!(
        "{trajectories} paths × {jumps} jumps, {pairs} pairs, {violations} violations, max centroid residual {worst_residual:.1e}"
    );
    if let Some(f) = first {
        detail.push_str(&format!("; first: {f}"));
    }
    Ok((violations == 0 && residual_ok, detail))
}

/// Holding times and per-level up/down transition counts of a path.
fn transition_profile(traj: &Trajectory, n: usize) -> (Vec<f64>, Vec<[u64; 2]>) {
    let mut counts = vec![[0u64; 2]; n + 1];
    for pair in traj.states().windows(2) {
        let (a, b) = (pair[0].attached_count(), pair[1].attached_count());
        counts[a][usize::from(b > a)] += 1;
    }
    (traj.holding_times(), counts)
}

/// Sum over levels of 2×2 engine-by-direction homogeneity statistics.
/// Conditional on visit counts the directions are independent, so the
/// sum is χ² with one degree of freedom per informative level.
fn stratified_homogeneity(a: &[[u64; 2]], b: &[[u64; 2]]) -> TestOutcome {
    let mut statistic = 0.0;
    let mut dof = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = chi_square_homogeneity(&[x.to_vec(), y.to_vec()]);
        statistic += t.statistic;
        dof += t.dof;
    }
    let p_value = if dof > 0.0 {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        1.0 - ChiSquared::new(dof).expect("dof > 0").cdf(statistic)
    } else {
        1.0
    };
    TestOutcome { statistic, dof, p_value }
}

fn semi_markov_equivalence(level: Level, seed: u64) -> Verdict {
    // equal rates make the holding-time law level-independent, so the
    // pooled holding times are i.i.d. under both engines
    let n = 8;
    let params = ModelParams::new(0.05, 0.05, n, unit_box())?;
    let events = 100_000;
    let initial = State::all_attached(n, &[0.0, 0.0])?;
    let waits = SemiMarkovConfig::exponential(&params)?;
    let mut markov = MarkovProcess::new(&params, initial.clone(), substream(seed, 0))?;
    let markov = Trajectory::record_jumps(&mut markov, events);
    let mut semi = SemiMarkovProcess::new(&params, &waits, initial.clone(), substream(seed, 1))?;
    let semi = Trajectory::record_jumps(&mut semi, events);
    let (hold_m, trans_m) = transition_profile(&markov, n);
    let (hold_s, trans_s) = transition_profile(&semi, n);
    let ks = ks_two_sample(&hold_m, &hold_s);
    let chi = stratified_homogeneity(&trans_m, &trans_s);

    let mut config = exponential_sweep_config(level, seed);
    config.model.n = OneOrMany::One(n);
    config.model.theta_d = OneOrMany::One(0.05);
    config.engines = vec![EngineSpec::SemiMarkov {
        label: None,
        attach_wait: WaitSpec::Exponential { mean_s: 20.0 },
        detach_wait: WaitSpec::Exponential { mean_s: 20.0 },
    }];
    let rows = run_sweep(&config, |_| Ok(()))?;
    let (velocity_ok, velocity_detail) = check_velocity_rows(&rows).verdict(rows.len());

    let passed = ks.p_value > SIGNIFICANCE && chi.p_value > SIGNIFICANCE && velocity_ok;
    Ok((
        passed,
        format!(
            "KS D {:.4} p {:.3}; transition χ² {:.2} on {} df p {:.3}; velocity {velocity_detail}",
            ks.statistic, ks.p_value, chi.statistic, chi.dof, chi.p_value
        ),
    ))
}

fn wait_law_sweep(level: Level, seed: u64) -> Verdict {
    let config = wait_law_config(level, seed);
    let rows = run_sweep(&config, |_| Ok(()))?;
    let mut csv = Vec::new();
    write_aggregate_csv(&rows, &mut csv)?;
    let lines = csv.iter().filter(|&&b| b == b'\n').count();
    let expected = config.points()?.len();
    let finite = rows.iter().all(|r| r.estimate.iter().chain(&r.standard_error).all(|x| x.is_finite()));
    let exponential: Vec<&AggregateRow> = rows.iter().filter(|r| r.distribution == "exponential").collect();
    let (velocity_ok, detail) = check_velocity_rows(exponential.iter().copied()).verdict(exponential.len());
    Ok((
        lines == expected + 1 && finite && velocity_ok,
        format!("{} rows written ({} expected); exponential rows: {detail}", lines.saturating_sub(1), expected),
    ))
}

fn determinism_config(seed: u64) -> ExperimentConfig {
    let mut config = exponential_sweep_config(Level::Quick, seed);
    config.ensemble_size = 16;
    config.horizon_h = 2.0;
    config.burn_in_h = 0.5;
    config.window_end_h = 2.0;
    config.model.n = OneOrMany::Many(vec![2, 5]);
    config.engines.push(EngineSpec::SemiMarkov {
        label: None,
        attach_wait: WaitSpec::ContinuousPoisson { mean_s: 20.0 },
        detach_wait: WaitSpec::TruncatedNormal { location_s: 60.0, scale_s: 1.0 },
    });
    config
}

fn render(config: &ExperimentConfig, threads: usize) -> Result<(Vec<u8>, Vec<u8>)> {
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Error::InvalidState(e.to_string()))?;
    pool.install(|| {
        let mut jsonl = Vec::new();
        let rows = run_sweep(config, |rec| {
            let line = serde_json::to_string(&rec).map_err(|e| Error::InvalidState(e.to_string()))?;
            jsonl.extend_from_slice(line.as_bytes());
            jsonl.push(b'\n');
            Ok(())
        })?;
        let mut csv = Vec::new();
        write_aggregate_csv(&rows, &mut csv)?;
        Ok((csv, jsonl))
    })
}

fn determinism(seed: u64) -> Verdict {
    let config = determinism_config(seed);
    let one = render(&config, 1)?;
    let again = render(&config, 1)?;
    let many = render(&config, 3)?;
    let same = one == again && one == many;
    Ok((same, format!("{} CSV bytes, {} JSONL bytes; 1 vs 1 vs 3 threads identical: {same}", one.0.len(), one.1.len())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_numbers_are_one_based() {
        let numbers: Vec<usize> = Criterion::ALL.iter().map(|c| c.number()).collect();
        assert_eq!(numbers, (1..=8).collect::<Vec<_>>());
    }

    #[test]
    fn builder_configs_match_shipped_files() {
        let sweep = ExperimentConfig::from_toml_str(include_str!("../configs/exponential_sweep.toml")).unwrap();
        let mut built = exponential_sweep_config(Level::Full, DEFAULT_SEED);
        built.output = sweep.output.clone();
        assert_eq!(sweep, built);
        let laws = ExperimentConfig::from_toml_str(include_str!("../configs/wait_laws.toml")).unwrap();
        let mut built = wait_law_config(Level::Full, DEFAULT_SEED);
        built.output = laws.output.clone();
        assert_eq!(laws.points().unwrap().len(), built.points().unwrap().len());
        assert_eq!(laws.engines, built.engines);
    }

    #[test]
    fn identity_criterion_passes() {
        let outcome = run_criterion(Criterion::VelocityIdentity, Level::Quick, DEFAULT_SEED, None);
        assert!(outcome.passed, "{outcome}");
    }

    #[test]
    fn stratified_homogeneity_of_identical_tables() {
        let a = [[10, 20], [0, 7], [30, 30]];
        let t = stratified_homogeneity(&a, &a);
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.dof, 2.0);
    }

    #[test]
    fn velocity_check_flags_bias() {
        let row = AggregateRow {
            n: 1,
            theta_a: 0.05,
            theta_d: 0.05,
            engine: "markov".into(),
            distribution: "exponential".into(),
            ensemble_size: 10,
            burn_in_s: 0.0,
            window_end_s: 1.0,
            estimate: vec![1.0],
            standard_error: vec![0.01],
            theory: vec![1.1],
            tv_to_sigma: 0.0,
        };
        assert_eq!(check_velocity_rows([&row]).failures.len(), 1);
        let good = AggregateRow { estimate: vec![1.09], standard_error: vec![0.01], ..row };
        assert!(check_velocity_rows([&good]).failures.is_empty());
    }
}

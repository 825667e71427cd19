//! Command implementations behind the `ctcm` binary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::Serialize;

use crate::analysis::{empirical_count_distribution, estimate_velocity, expected_velocity, steady_state, tv_distance};
use crate::config::{ExperimentConfig, SweepPoint};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::simulator::{simulate_ensemble, EnsembleSpec, PathRecord};
use crate::stochastic::substream;
use crate::validate::{self, CriterionOutcome, Level};

/// Stream index offset reserved for deriving per-point seeds; member
/// substreams use indices below the ensemble size.
const POINT_SEED_STREAM: u64 = 1 << 63;

/// Seed for the ensemble of sweep point `index`.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    substream(seed, POINT_SEED_STREAM + index as u64).next_u64()
}

/// Shortest decimal that round-trips, so output is byte-stable.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn axis_name(axis: usize, dim: usize) -> String {
    if dim <= 3 {
        ["x", "y", "z"][axis].to_string()
    } else {
        axis.to_string()
    }
}

/// One line of the `simulate` CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub n: usize,
    pub theta_a: f64,
    pub theta_d: f64,
    pub engine: String,
    pub distribution: String,
    pub ensemble_size: usize,
    pub burn_in_s: f64,
    pub window_end_s: f64,
    pub estimate: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub theory: Vec<f64>,
    /// Distance of the empirical count law at burn-in from the binomial
    /// steady state.
    pub tv_to_sigma: f64,
}

/// One line of the optional per-trajectory JSONL output.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecordOut {
    pub point: usize,
    pub n: usize,
    pub theta_a: f64,
    pub theta_d: f64,
    pub engine: String,
    pub distribution: String,
    pub trajectory_id: u64,
    pub t_burn_centroid: Vec<f64>,
    pub t_end_centroid: Vec<f64>,
    pub jump_count: u64,
    pub occupancy: Vec<f64>,
}

fn run_point(
    config: &ExperimentConfig,
    index: usize,
    point: &SweepPoint,
    mut on_record: impl FnMut(TrajectoryRecordOut) -> Result<()>,
) -> Result<AggregateRow> {
    let (burn, end) = (config.burn_in_s(), config.window_end_s());
    let spec = EnsembleSpec {
        params: point.params.clone(),
        engine: point.engine.clone(),
        initial: point.initial.clone(),
        horizon: config.horizon_s(),
        count: config.ensemble_size,
        seed: point_seed(config.seed, index),
        probes: vec![burn, end],
        retain_paths: None,
    };
    let summaries = simulate_ensemble(&spec)?;
    let estimate = estimate_velocity(&summaries, burn, end)?;
    let p = &point.params;
    let sigma = steady_state(p.n(), p.theta_a(), p.theta_d())?;
    let tv = tv_distance(&empirical_count_distribution(&summaries, p.n(), burn)?, &sigma)?;
    for s in &summaries {
        on_record(TrajectoryRecordOut {
            point: index,
            n: p.n(),
            theta_a: p.theta_a(),
            theta_d: p.theta_d(),
            engine: point.engine.name().into(),
            distribution: point.distribution.clone(),
            trajectory_id: s.id,
            t_burn_centroid: s.centroid_at(burn)?.to_vec(),
            t_end_centroid: s.centroid_at(end)?.to_vec(),
            jump_count: s.jump_count,
            occupancy: s.occupancy.clone(),
        })?;
    }
    Ok(AggregateRow {
        n: p.n(),
        theta_a: p.theta_a(),
        theta_d: p.theta_d(),
        engine: point.engine.name().into(),
        distribution: point.distribution.clone(),
        ensemble_size: config.ensemble_size,
        burn_in_s: burn,
        window_end_s: end,
        estimate: estimate.mean_velocity,
        standard_error: estimate.standard_error,
        theory: expected_velocity(p),
        tv_to_sigma: tv,
    })
}

/// Runs every sweep point of `config` on the current rayon pool.
/// `on_record` sees each trajectory record in point then member order.
pub fn run_sweep(
    config: &ExperimentConfig,
    mut on_record: impl FnMut(TrajectoryRecordOut) -> Result<()>,
) -> Result<Vec<AggregateRow>> {
    config.points()?.iter().enumerate().map(|(i, point)| run_point(config, i, point, &mut on_record)).collect()
}

/// Writes aggregate rows as CSV. Velocities are in length per second,
/// times in seconds.
pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let dim = rows.first().map_or(0, |r| r.estimate.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> =
        ["n", "theta_a", "theta_d", "engine", "distribution", "M", "burn_in_s", "window_s"].map(String::from).to_vec();
    for prefix in ["est_v", "se_v", "theory_v"] {
        header.extend((0..dim).map(|a| format!("{prefix}{}", axis_name(a, dim))));
    }
    header.push("tv_to_sigma".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.n.to_string(),
            fmt_f64(r.theta_a),
            fmt_f64(r.theta_d),
            r.engine.clone(),
            r.distribution.clone(),
            r.ensemble_size.to_string(),
            fmt_f64(r.burn_in_s),
            fmt_f64(r.window_end_s),
        ];
        for v in [&r.estimate, &r.standard_error, &r.theory] {
            rec.extend(v.iter().map(|&x| fmt_f64(x)));
        }
        rec.push(fmt_f64(r.tv_to_sigma));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Output { path: path.to_path_buf(), source })
}

/// `ctcm simulate`: runs the sweep and writes the aggregate CSV to `out`
/// (or the config's `output.csv`, or stdout), plus JSONL if configured.
pub fn cmd_simulate(config: &ExperimentConfig, out: Option<&Path>, jsonl: Option<&Path>) -> Result<Vec<AggregateRow>> {
    let csv_path: Option<PathBuf> = out.map(Path::to_path_buf).or_else(|| config.output.csv.clone());
    let jsonl_path: Option<PathBuf> = jsonl.map(Path::to_path_buf).or_else(|| config.output.jsonl.clone());
    // open outputs up front so a bad path fails before any simulation
    let mut csv_file = csv_path.as_deref().map(create).transpose()?;
    let mut jsonl_file = jsonl_path.as_deref().map(create).transpose()?;
    let rows = run_sweep(config, |rec| {
        if let Some(f) = jsonl_file.as_mut() {
            let line = serde_json::to_string(&rec).map_err(|e| Error::InvalidState(e.to_string()))?;
            writeln!(f, "{line}")?;
        }
        Ok(())
    })?;
    match csv_file.as_mut() {
        Some(f) => write_aggregate_csv(&rows, f)?,
        None => write_aggregate_csv(&rows, std::io::stdout().lock())?,
    }
    if let Some(mut f) = csv_file {
        f.flush()?;
    }
    if let Some(mut f) = jsonl_file {
        f.flush()?;
    }
    Ok(rows)
}

/// One line of the `theory` CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryRow {
    pub n: usize,
    pub theta_a: f64,
    pub theta_d: f64,
    pub velocity: Vec<f64>,
    pub sigma: Vec<f64>,
}

pub fn theory_row(params: &ModelParams) -> Result<TheoryRow> {
    Ok(TheoryRow {
        n: params.n(),
        theta_a: params.theta_a(),
        theta_d: params.theta_d(),
        velocity: expected_velocity(params),
        sigma: steady_state(params.n(), params.theta_a(), params.theta_d())?.probs().to_vec(),
    })
}

/// Writes theory rows as CSV; `sigma` is the `;`-joined steady-state law
/// over attached counts `0..=n`.
pub fn write_theory_csv<W: Write>(rows: &[TheoryRow], out: W) -> Result<()> {
    let dim = rows.first().map_or(0, |r| r.velocity.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["n", "theta_a", "theta_d"].map(String::from).to_vec();
    header.extend((0..dim).map(|a| format!("theory_v{}", axis_name(a, dim))));
    header.push("sigma".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.n.to_string(), fmt_f64(r.theta_a), fmt_f64(r.theta_d)];
        rec.extend(r.velocity.iter().map(|&x| fmt_f64(x)));
        rec.push(r.sigma.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(";"));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `ctcm theory`: closed forms for each distinct parameter set.
pub fn cmd_theory(params: &[ModelParams], out: Option<&Path>) -> Result<Vec<TheoryRow>> {
    let mut rows: Vec<TheoryRow> = Vec::new();
    for p in params {
        let row = theory_row(p)?;
        if !rows.contains(&row) {
            rows.push(row);
        }
    }
    match out {
        Some(path) => {
            let mut f = create(path)?;
            write_theory_csv(&rows, &mut f)?;
            f.flush()?;
        }
        None => write_theory_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(rows)
}

/// `ctcm validate`: runs the criteria battery, printing one line each.
/// A config, when given, supplies the model for the path-bound criterion.
/// `only` restricts the run to the listed criterion numbers.
pub fn cmd_validate(
    level: Level,
    seed: u64,
    config: Option<&ExperimentConfig>,
    only: &[usize],
) -> Result<Vec<CriterionOutcome>> {
    if let Some(bad) = only.iter().find(|&&c| !(1..=validate::Criterion::ALL.len()).contains(&c)) {
        return Err(Error::InvalidParameter(format!("no criterion {bad}")));
    }
    let bounds_override = match config {
        Some(c) => Some(
            c.points()?.into_iter().next().ok_or_else(|| Error::Config("config has no sweep points".into()))?.params,
        ),
        None => None,
    };
    let mut outcomes = Vec::new();
    for criterion in validate::Criterion::ALL {
        if !only.is_empty() && !only.contains(&criterion.number()) {
            continue;
        }
        let outcome = validate::run_criterion(criterion, level, seed, bounds_override.as_ref());
        println!("{outcome}");
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ctcm::cli::{cmd_simulate, cmd_theory, cmd_validate};
use ctcm::config::ExperimentConfig;
use ctcm::validate::{Level, DEFAULT_SEED};
use ctcm::{ModelParams, PerturbationDistribution};

/// Continuous-time centroid model: ensemble simulation, closed-form theory
/// and the validation battery.
#[derive(Parser)]
#[command(name = "ctcm", version)]
struct Cli {
    /// Worker threads for ensemble runs (default: all cores).
    #[arg(long, global = true, env = "CTCM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep in a config file and write the aggregate CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; defaults to the config's `output.csv`, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-trajectory JSONL destination.
        #[arg(long)]
        jsonl: Option<PathBuf>,
    },
    /// Print closed-form velocity and steady-state law.
    Theory(TheoryArgs),
    /// Run the acceptance criteria; exits nonzero if any fails.
    Validate {
        #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
        level: LevelArg,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Model whose paths the bound criterion checks instead of the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run only these criteria (1-8); repeatable or comma-separated.
        #[arg(long, value_delimiter = ',')]
        criterion: Vec<usize>,
    },
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, conflicts_with_all = ["n", "theta_a", "theta_d"])]
    config: Option<PathBuf>,
    /// Site counts.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Attachment rates per second.
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    theta_a: Vec<f64>,
    /// Detachment rates per second.
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    theta_d: Vec<f64>,
    /// Mean perturbation vector.
    #[arg(long, value_delimiter = ',', default_value = "1,1")]
    eta_mean: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

fn theory_params(args: &TheoryArgs) -> Result<Vec<ModelParams>> {
    if let Some(path) = &args.config {
        let config = ExperimentConfig::from_path(path)?;
        return Ok(config.points()?.into_iter().map(|p| p.params).collect());
    }
    if args.n.is_empty() {
        bail!("either --config or --n is required");
    }
    let eta = PerturbationDistribution::point_mass(args.eta_mean.clone())?;
    let mut out = Vec::new();
    for &n in &args.n {
        for &ta in &args.theta_a {
            for &td in &args.theta_d {
                out.push(ModelParams::new(ta, td, n, eta.clone())?);
            }
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("configuring thread pool")?;
    }
    match cli.command {
        Command::Simulate { config, seed, out, jsonl } => {
            let mut config = ExperimentConfig::from_path(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            cmd_simulate(&config, out.as_deref(), jsonl.as_deref())?;
            Ok(true)
        }
        Command::Theory(args) => {
            cmd_theory(&theory_params(&args)?, args.out.as_deref())?;
            Ok(true)
        }
        Command::Validate { level, seed, config, criterion } => {
            let config = config.map(|p| ExperimentConfig::from_path(&p)).transpose()?;
            let level = match level {
                LevelArg::Quick => Level::Quick,
                LevelArg::Full => Level::Full,
            };
            let outcomes = cmd_validate(level, seed, config.as_ref(), &criterion)?;
            Ok(outcomes.iter().all(|o| o.passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

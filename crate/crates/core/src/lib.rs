//! Simulation and analysis of the continuous-time centroid model (CTCM).
//!
//! A cell is represented by `n` adhesion sites that attach to and detach
//! from a substrate at random. The cell body sits at the centroid of the
//! attached sites; a newly attached site lands at a random perturbation
//! from the current centroid. The model is a pure jump Markov process whose
//! projection onto the attached count is a finite birth-death chain.
//!
//! * [`model`]: state, rates and the exact single-jump maps.
//! * [`stochastic`]: random sources, perturbation and wait-time laws.
//! * [`simulator`]: Markov (global clock) and semi-Markov (per-site clock)
//!   trajectory engines, plus the seeded ensemble driver.
//! * [`analysis`]: stationary distribution, expected velocity and the
//!   estimators that compare simulation against them.
//! * [`config`], [`cli`]: experiment files and the command implementations
//!   behind the `ctcm` binary.
//! * [`validate`]: the invariant and oracle battery run by `ctcm validate`.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod model;
pub mod simulator;
pub mod stats;
pub mod stochastic;
pub mod validate;

pub use analysis::{
    check_growth_bounds, drift_oracle, empirical_count_distribution, estimate_velocity, expected_velocity,
    invariance_check, steady_state, tv_distance, CountDistribution, GrowthReport, VelocityEstimate,
};
pub use error::{Error, Result};
pub use model::{
    attach, detach, expect_one_step, flip_status, project, rate, sample_jump, site_selection_probs, AttachCount,
    EtaQuadrature, ModelParams, Observable, Probe, State,
};
pub use simulator::{
    simulate_ensemble, simulate_markov, simulate_semi_markov, state_at, Engine, EnsembleSpec, SemiMarkovConfig,
    Trajectory, TrajectorySummary,
};
pub use stochastic::{make_rng, substream, PerturbationDistribution, SimRng, WaitDistribution};

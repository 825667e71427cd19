//! Experiment configuration files.
//!
//! A config is a TOML document. Times of the run protocol are given in
//! hours and converted to seconds exactly (×3600); rates are per second and
//! wait-time parameters are in seconds.
//!
//! ```toml
//! seed = 2026
//! ensemble_size = 2000
//! horizon_h = 75.0
//! burn_in_h = 10.0
//! window_end_h = 75.0
//!
//! [model]
//! n = [1, 2, 4, 8, 16, 32]
//! theta_a = 0.05
//! theta_d = [0.2, 0.05, 0.0125]
//!
//! [eta]
//! kind = "uniform_box"
//! center = [1.0, 1.0]
//! half_width = 1.0
//!
//! [[engines]]
//! kind = "markov"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, State};
use crate::simulator::{Engine, SemiMarkovConfig};
use crate::stochastic::{PerturbationDistribution, WaitDistribution};

pub const SECONDS_PER_HOUR: f64 = 3600.0;
pub const DEFAULT_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(vs) => vs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub ensemble_size: usize,
    pub horizon_h: f64,
    pub burn_in_h: f64,
    pub window_end_h: f64,
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<EtaSpec>,
    #[serde(default = "default_engines")]
    pub engines: Vec<EngineSpec>,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_engines() -> Vec<EngineSpec> {
    vec![EngineSpec::Markov]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: OneOrMany<usize>,
    /// Per second. Ignored by semi-Markov engines, whose rates are the
    /// reciprocal mean waits.
    #[serde(default = "default_rate")]
    pub theta_a: OneOrMany<f64>,
    #[serde(default = "default_rate")]
    pub theta_d: OneOrMany<f64>,
    /// Spatial dimension of the default perturbation law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Declared ∞-norm support radius of η; defaults to the exact radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_radius: Option<f64>,
}

fn default_rate() -> OneOrMany<f64> {
    OneOrMany::One(1.0 / 20.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaSpec {
    UniformBox {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default = "unit_half_width")]
        half_width: OneOrMany<f64>,
    },
    PointMass {
        at: Vec<f64>,
    },
    Mixture {
        atoms: Vec<AtomSpec>,
    },
}

fn unit_half_width() -> OneOrMany<f64> {
    OneOrMany::One(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub weight: f64,
    pub at: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EngineSpec {
    Markov,
    SemiMarkov {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        attach_wait: WaitSpec,
        detach_wait: WaitSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WaitSpec {
    Exponential { mean_s: f64 },
    TruncatedNormal { location_s: f64, scale_s: f64 },
    ContinuousPoisson { mean_s: f64 },
}

impl WaitSpec {
    pub fn build(&self) -> Result<WaitDistribution> {
        match *self {
            WaitSpec::Exponential { mean_s } => {
                if !(mean_s.is_finite() && mean_s > 0.0) {
                    return Err(Error::InvalidParameter(format!("exponential mean must be > 0, got {mean_s}")));
                }
                WaitDistribution::exponential(1.0 / mean_s)
            }
            WaitSpec::TruncatedNormal { location_s, scale_s } => {
                WaitDistribution::truncated_normal(location_s, scale_s)
            }
            WaitSpec::ContinuousPoisson { mean_s } => WaitDistribution::continuous_poisson(mean_s),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// Number of sites attached at t = 0 (the first ones); default all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attached: Option<usize>,
    /// Common starting location of every site and the centroid; default
    /// the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jsonl: Option<PathBuf>,
}

/// One fully specified run of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub params: ModelParams,
    pub engine: Engine,
    /// Wait-law label: "exponential" for the Markov engine.
    pub distribution: String,
    pub initial: State,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn horizon_s(&self) -> f64 {
        self.horizon_h * SECONDS_PER_HOUR
    }

    pub fn burn_in_s(&self) -> f64 {
        self.burn_in_h * SECONDS_PER_HOUR
    }

    pub fn window_end_s(&self) -> f64 {
        self.window_end_h * SECONDS_PER_HOUR
    }

    /// Checks protocol times and builds every sweep point once so that any
    /// invalid distribution is reported before a run starts.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: String| Error::Config(format!("field `{name}`: {msg}"));
        if self.ensemble_size == 0 {
            return Err(field("ensemble_size", "must be ≥ 1".into()));
        }
        for (name, v) in
            [("horizon_h", self.horizon_h), ("burn_in_h", self.burn_in_h), ("window_end_h", self.window_end_h)]
        {
            if !(v.is_finite() && v >= 0.0) {
                return Err(field(name, format!("must be finite and ≥ 0, got {v}")));
            }
        }
        if self.burn_in_h >= self.window_end_h {
            return Err(field(
                "burn_in_h",
                format!("must be < window_end_h ({} ≥ {})", self.burn_in_h, self.window_end_h),
            ));
        }
        if self.window_end_h > self.horizon_h {
            return Err(field(
                "window_end_h",
                format!("must be ≤ horizon_h ({} > {})", self.window_end_h, self.horizon_h),
            ));
        }
        if self.engines.is_empty() {
            return Err(field("engines", "at least one engine is required".into()));
        }
        for (name, list) in [("model.theta_a", &self.model.theta_a), ("model.theta_d", &self.model.theta_d)] {
            if list.to_vec().is_empty() {
                return Err(field(name, "list is empty".into()));
            }
        }
        if self.model.n.to_vec().is_empty() {
            return Err(field("model.n", "list is empty".into()));
        }
        self.points().map(|_| ())
    }

    fn eta(&self) -> Result<PerturbationDistribution> {
        let dim = self.model.dim.unwrap_or(DEFAULT_DIM);
        let eta = match &self.eta {
            None => PerturbationDistribution::uniform_box(vec![1.0; dim], vec![1.0; dim]),
            Some(EtaSpec::UniformBox { center, half_width }) => {
                let center = center.clone().unwrap_or_else(|| vec![1.0; dim]);
                let half_width = match half_width {
                    OneOrMany::One(h) => vec![*h; center.len()],
                    OneOrMany::Many(hs) => hs.clone(),
                };
                PerturbationDistribution::uniform_box(center, half_width)
            }
            Some(EtaSpec::PointMass { at }) => PerturbationDistribution::point_mass(at.clone()),
            Some(EtaSpec::Mixture { atoms }) => {
                PerturbationDistribution::mixture(atoms.iter().map(|a| (a.weight, a.at.clone())).collect())
            }
        }
        .map_err(|e| Error::Config(format!("field `eta`: {e}")))?;
        if let Some(d) = self.model.dim {
            if d != eta.dim() {
                return Err(Error::Config(format!(
                    "field `model.dim`: {d} disagrees with eta dimension {}",
                    eta.dim()
                )));
            }
        }
        Ok(eta)
    }

    fn build_params(
        &self,
        theta_a: f64,
        theta_d: f64,
        n: usize,
        eta: &PerturbationDistribution,
    ) -> Result<ModelParams> {
        let params = ModelParams::new(theta_a, theta_d, n, eta.clone())
            .map_err(|e| Error::Config(format!("field `model`: {e}")))?;
        match self.model.support_radius {
            Some(r) => {
                params.with_support_radius(r).map_err(|e| Error::Config(format!("field `model.support_radius`: {e}")))
            }
            None => Ok(params),
        }
    }

    fn initial_state(&self, n: usize, dim: usize) -> Result<State> {
        let origin = self.initial.origin.clone().unwrap_or_else(|| vec![0.0; dim]);
        if origin.len() != dim {
            return Err(Error::Config(format!(
                "field `initial.origin`: dimension {} disagrees with eta dimension {dim}",
                origin.len()
            )));
        }
        let attached = self.initial.attached.unwrap_or(n);
        State::with_attached(n, attached.min(n), &origin).map_err(|e| Error::Config(format!("field `initial`: {e}")))
    }

    /// Expands the sweep: engines outermost, then `n`, then `θ_a`, then `θ_d`.
    /// Semi-Markov engines contribute one point per `n`, with rates set to
    /// the reciprocal mean waits.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let eta = self.eta()?;
        let mut out = Vec::new();
        for (e, engine) in self.engines.iter().enumerate() {
            for &n in &self.model.n.to_vec() {
                let initial = self.initial_state(n, eta.dim())?;
                match engine {
                    EngineSpec::Markov => {
                        for &ta in &self.model.theta_a.to_vec() {
                            for &td in &self.model.theta_d.to_vec() {
                                out.push(SweepPoint {
                                    params: self.build_params(ta, td, n, &eta)?,
                                    engine: Engine::Markov,
                                    distribution: "exponential".into(),
                                    initial: initial.clone(),
                                });
                            }
                        }
                    }
                    EngineSpec::SemiMarkov { label, attach_wait, detach_wait } => {
                        let wrap =
                            |side: &str, err: Error| Error::Config(format!("field `engines[{e}].{side}`: {err}"));
                        let attach_wait = attach_wait.build().map_err(|err| wrap("attach_wait", err))?;
                        let detach_wait = detach_wait.build().map_err(|err| wrap("detach_wait", err))?;
                        let distribution = label.clone().unwrap_or_else(|| {
                            if attach_wait.name() == detach_wait.name() {
                                attach_wait.name().to_string()
                            } else {
                                format!("{}/{}", attach_wait.name(), detach_wait.name())
                            }
                        });
                        let params = self.build_params(1.0 / attach_wait.mean(), 1.0 / detach_wait.mean(), n, &eta)?;
                        out.push(SweepPoint {
                            params,
                            engine: Engine::SemiMarkov(SemiMarkovConfig { attach_wait, detach_wait }),
                            distribution,
                            initial: initial.clone(),
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

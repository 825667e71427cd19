//! Trajectory engines.
//!
//! [`MarkovProcess`] is the jump-chain construction: hold for a standard
//! exponential divided by the current rate, then apply one draw of the
//! jump kernel. [`SemiMarkovProcess`] gives every site its own clock drawn
//! from an arbitrary wait law and processes events in time order. Both
//! implement [`JumpProcess`], which the recorders and the ensemble driver
//! consume.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Jump, ModelParams, State};
use crate::stochastic::{substream, WaitDistribution};

/// The centroid is snapped to the recomputed attached mean after this many
/// jumps, bounding floating-point drift on long runs.
pub const RENORMALIZE_EVERY: u64 = 1_000_000;

/// Default cap on the number of states a recorded [`Trajectory`] may hold.
pub const DEFAULT_MAX_STATES: usize = 20_000_000;

pub trait JumpProcess {
    /// Time of the last applied jump (0 before any).
    fn time(&self) -> f64;
    /// Time at which the next jump will occur.
    fn next_time(&self) -> f64;
    fn state(&self) -> &State;
    fn jumps(&self) -> u64;
    /// Applies the next jump and schedules the following one.
    fn step(&mut self) -> Jump;
}

pub struct MarkovProcess<'a, R> {
    params: &'a ModelParams,
    state: State,
    time: f64,
    next_time: f64,
    jumps: u64,
    rng: R,
}

impl<'a, R: Rng> MarkovProcess<'a, R> {
    pub fn new(params: &'a ModelParams, initial: State, mut rng: R) -> Result<Self> {
        initial.check_against(params)?;
        let hold: f64 = Exp1.sample(&mut rng);
        let next_time = hold / params.rate_for_count(initial.attached_count());
        Ok(Self { params, state: initial, time: 0.0, next_time, jumps: 0, rng })
    }
}

impl<R: Rng> JumpProcess for MarkovProcess<'_, R> {
    fn time(&self) -> f64 {
        self.time
    }

    fn next_time(&self) -> f64 {
        self.next_time
    }

    fn state(&self) -> &State {
        &self.state
    }

    fn jumps(&self) -> u64 {
        self.jumps
    }

    #[inline]
    fn step(&mut self) -> Jump {
        let jump = self.state.jump_in_place(self.params, &mut self.rng);
        self.time = self.next_time;
        self.jumps += 1;
        if self.jumps.is_multiple_of(RENORMALIZE_EVERY) {
            self.state.renormalize_centroid();
        }
        let hold: f64 = Exp1.sample(&mut self.rng);
        self.next_time = self.time + hold / self.params.rate_for_count(self.state.attached_count());
        jump
    }
}

/// Wait-time laws for the per-site clocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiMarkovConfig {
    /// Time a detached site waits before attaching.
    pub attach_wait: WaitDistribution,
    /// Time an attached site stays attached.
    pub detach_wait: WaitDistribution,
}

impl SemiMarkovConfig {
    /// Exponential clocks at the model's rates, which reproduce the Markov
    /// process exactly.
    pub fn exponential(params: &ModelParams) -> Result<Self> {
        Ok(Self {
            attach_wait: WaitDistribution::exponential(params.theta_a())?,
            detach_wait: WaitDistribution::exponential(params.theta_d())?,
        })
    }

    fn wait_for(&self, attached: bool) -> &WaitDistribution {
        if attached {
            &self.detach_wait
        } else {
            &self.attach_wait
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Clock {
    time: f64,
    site: usize,
}

impl PartialEq for Clock {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Clock {}

impl PartialOrd for Clock {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Clock {
    // ties go to the lower site index
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.site.cmp(&other.site))
    }
}

pub struct SemiMarkovProcess<'a, R> {
    params: &'a ModelParams,
    waits: &'a SemiMarkovConfig,
    state: State,
    clocks: BinaryHeap<Reverse<Clock>>,
    time: f64,
    jumps: u64,
    rng: R,
}

impl<'a, R: Rng> SemiMarkovProcess<'a, R> {
    /// Every site starts with a fresh clock drawn for its current status.
    pub fn new(params: &'a ModelParams, waits: &'a SemiMarkovConfig, initial: State, mut rng: R) -> Result<Self> {
        initial.check_against(params)?;
        let clocks = (0..initial.n())
            .map(|site| {
                let time = waits.wait_for(initial.is_attached(site)).sample(&mut rng);
                Reverse(Clock { time, site })
            })
            .collect();
        Ok(Self { params, waits, state: initial, clocks, time: 0.0, jumps: 0, rng })
    }
}

impl<R: Rng> JumpProcess for SemiMarkovProcess<'_, R> {
    fn time(&self) -> f64 {
        self.time
    }

    fn next_time(&self) -> f64 {
        self.clocks.peek().expect("one clock per site").0.time
    }

    fn state(&self) -> &State {
        &self.state
    }

    fn jumps(&self) -> u64 {
        self.jumps
    }

    #[inline]
    fn step(&mut self) -> Jump {
        let Reverse(Clock { time, site }) = self.clocks.pop().expect("one clock per site");
        self.time = time;
        self.state.toggle_site(site, self.params, &mut self.rng);
        self.jumps += 1;
        if self.jumps.is_multiple_of(RENORMALIZE_EVERY) {
            self.state.renormalize_centroid();
        }
        let attached = self.state.is_attached(site);
        let wait = self.waits.wait_for(attached).sample(&mut self.rng);
        self.clocks.push(Reverse(Clock { time: time + wait, site }));
        Jump { site, attached }
    }
}

/// Recorded path: jump times `τ_0 = 0 ≤ τ_1 ≤ …` and post-jump states.
///
/// Jump times are strictly increasing for continuous wait laws; equal
/// times can only arise from degenerate (fixed) waits or from a holding
/// time below the floating-point resolution of the clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    jump_times: Vec<f64>,
    states: Vec<State>,
    horizon: f64,
}

impl Trajectory {
    pub fn from_parts(jump_times: Vec<f64>, states: Vec<State>, horizon: f64) -> Result<Self> {
        if states.is_empty() || jump_times.len() != states.len() {
            return Err(Error::InvalidState("trajectory needs one time per state and at least one state".into()));
        }
        if jump_times[0] != 0.0 {
            return Err(Error::InvalidState("trajectory must start at t = 0".into()));
        }
        if jump_times.windows(2).any(|w| w[0].is_nan() || w[1].is_nan() || w[1] < w[0]) {
            return Err(Error::InvalidState("jump times must be nondecreasing".into()));
        }
        let last = *jump_times.last().unwrap();
        if horizon.is_nan() || last.is_nan() || horizon < last {
            return Err(Error::InvalidState("last jump lies beyond the horizon".into()));
        }
        for w in states.windows(2) {
            if w[0].n() != w[1].n() || w[0].dim() != w[1].dim() {
                return Err(Error::InvalidState("states differ in shape".into()));
            }
            let flips = w[0].psi().iter().zip(w[1].psi()).filter(|(a, b)| a != b).count();
            if flips != 1 {
                return Err(Error::InvalidState(format!(
                    "consecutive states must differ in exactly one status bit, found {flips}"
                )));
            }
        }
        Ok(Self { jump_times, states, horizon })
    }

    /// Runs `process` until its next jump would pass `horizon`.
    pub fn record<P: JumpProcess>(process: &mut P, horizon: f64, max_states: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be finite and > 0, got {horizon}")));
        }
        let mut jump_times = vec![process.time()];
        let mut states = vec![process.state().clone()];
        while process.next_time() <= horizon {
            if states.len() >= max_states {
                return Err(Error::TrajectoryTooLarge { limit: max_states });
            }
            process.step();
            jump_times.push(process.time());
            states.push(process.state().clone());
        }
        Ok(Self { jump_times, states, horizon })
    }

    /// Records exactly `jumps` jumps; the horizon is the last jump time.
    pub fn record_jumps<P: JumpProcess>(process: &mut P, jumps: usize) -> Self {
        let mut jump_times = Vec::with_capacity(jumps + 1);
        let mut states = Vec::with_capacity(jumps + 1);
        jump_times.push(process.time());
        states.push(process.state().clone());
        for _ in 0..jumps {
            process.step();
            jump_times.push(process.time());
            states.push(process.state().clone());
        }
        let horizon = *jump_times.last().unwrap();
        Self { jump_times, states, horizon }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Number of jumps (states beyond the initial one).
    pub fn jump_count(&self) -> usize {
        self.states.len() - 1
    }

    /// Time spent in each recorded state before the next jump. The final
    /// state's sojourn is censored by the horizon and is not included.
    pub fn holding_times(&self) -> Vec<f64> {
        self.jump_times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `Y_k` for the last `k` with `τ_k ≤ t` (right-continuous paths).
    pub fn state_at(&self, t: f64) -> Result<&State> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        let k = self.jump_times.partition_point(|&tau| tau <= t) - 1;
        Ok(&self.states[k])
    }
}

pub fn state_at(traj: &Trajectory, t: f64) -> Result<&State> {
    traj.state_at(t)
}

/// Full-path Markov simulation over `[0, horizon]`.
pub fn simulate_markov<R: Rng>(params: &ModelParams, initial: State, horizon: f64, rng: R) -> Result<Trajectory> {
    check_budget(params, horizon, DEFAULT_MAX_STATES)?;
    let mut process = MarkovProcess::new(params, initial, rng)?;
    Trajectory::record(&mut process, horizon, DEFAULT_MAX_STATES)
}

/// Full-path semi-Markov simulation over `[0, horizon]`.
pub fn simulate_semi_markov<R: Rng>(
    params: &ModelParams,
    waits: &SemiMarkovConfig,
    initial: State,
    horizon: f64,
    rng: R,
) -> Result<Trajectory> {
    let mut process = SemiMarkovProcess::new(params, waits, initial, rng)?;
    Trajectory::record(&mut process, horizon, DEFAULT_MAX_STATES)
}

fn check_budget(params: &ModelParams, horizon: f64, max_states: usize) -> Result<()> {
    let expected = params.theta_bound() * horizon;
    if expected.is_finite() && expected + 6.0 * expected.sqrt() + 1.0 > max_states as f64 {
        return Err(Error::TrajectoryTooLarge { limit: max_states });
    }
    Ok(())
}

/// Something that can report the centroid and attached count at a time.
pub trait PathRecord {
    fn horizon(&self) -> f64;
    fn centroid_at(&self, t: f64) -> Result<&[f64]>;
    fn count_at(&self, t: f64) -> Result<usize>;
}

impl PathRecord for Trajectory {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn centroid_at(&self, t: f64) -> Result<&[f64]> {
        Ok(self.state_at(t)?.centroid())
    }

    fn count_at(&self, t: f64) -> Result<usize> {
        Ok(self.state_at(t)?.attached_count())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub centroid: Vec<f64>,
    pub count: usize,
}

/// Per-trajectory output of an ensemble run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    pub id: u64,
    pub horizon: f64,
    pub jump_count: u64,
    pub final_centroid: Vec<f64>,
    /// State at each requested probe time, in the order requested.
    pub snapshots: Vec<Snapshot>,
    /// Fraction of `[0, horizon]` spent with `k` sites attached.
    pub occupancy: Vec<f64>,
    pub path: Option<Trajectory>,
}

impl TrajectorySummary {
    fn snapshot(&self, t: f64) -> Result<&Snapshot> {
        if t > self.horizon {
            return Err(Error::InsufficientHorizon { horizon: self.horizon, required: t });
        }
        self.snapshots.iter().find(|s| s.time == t).ok_or(Error::MissingSnapshot(t))
    }
}

impl PathRecord for TrajectorySummary {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn centroid_at(&self, t: f64) -> Result<&[f64]> {
        Ok(&self.snapshot(t)?.centroid)
    }

    fn count_at(&self, t: f64) -> Result<usize> {
        Ok(self.snapshot(t)?.count)
    }
}

/// Runs `process` to `horizon`, taking snapshots at `probes` and
/// accumulating count occupancy. Keeps the full path when `retain` is set.
pub fn summarize<P: JumpProcess>(
    process: &mut P,
    id: u64,
    horizon: f64,
    probes: &[f64],
    retain: Option<usize>,
) -> Result<TrajectorySummary> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon must be finite and > 0, got {horizon}")));
    }
    if let Some(&bad) = probes.iter().find(|&&p| !(0.0..=horizon).contains(&p)) {
        return Err(Error::TimeOutOfRange { t: bad, horizon });
    }
    let n = process.state().n();
    let mut order: Vec<usize> = (0..probes.len()).collect();
    order.sort_by(|&a, &b| probes[a].total_cmp(&probes[b]));
    let mut snapshots: Vec<Option<Snapshot>> = vec![None; probes.len()];
    let mut pending = order.into_iter().peekable();
    let mut occupancy = vec![0.0; n + 1];
    let mut path = retain.map(|_| (vec![process.time()], vec![process.state().clone()]));

    loop {
        let next = process.next_time();
        let until = next.min(horizon);
        while let Some(&p) = pending.peek() {
            if probes[p] < next {
                let s = process.state();
                snapshots[p] =
                    Some(Snapshot { time: probes[p], centroid: s.centroid().to_vec(), count: s.attached_count() });
                pending.next();
            } else {
                break;
            }
        }
        occupancy[process.state().attached_count()] += until - process.time();
        if next > horizon {
            break;
        }
        process.step();
        if let (Some((times, states)), Some(limit)) = (path.as_mut(), retain) {
            if states.len() >= limit {
                return Err(Error::TrajectoryTooLarge { limit });
            }
            times.push(process.time());
            states.push(process.state().clone());
        }
    }
    occupancy.iter_mut().for_each(|o| *o /= horizon);

    Ok(TrajectorySummary {
        id,
        horizon,
        jump_count: process.jumps(),
        final_centroid: process.state().centroid().to_vec(),
        snapshots: snapshots.into_iter().map(|s| s.expect("every probe visited")).collect(),
        occupancy,
        path: path.map(|(jump_times, states)| Trajectory { jump_times, states, horizon }),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Engine {
    Markov,
    SemiMarkov(SemiMarkovConfig),
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Markov => "markov",
            Engine::SemiMarkov(_) => "semi_markov",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub params: ModelParams,
    pub engine: Engine,
    pub initial: State,
    /// Seconds.
    pub horizon: f64,
    pub count: usize,
    pub seed: u64,
    /// Times (seconds) at which each member's state is snapshotted.
    pub probes: Vec<f64>,
    /// Keep full paths, up to this many states per member.
    pub retain_paths: Option<usize>,
}

impl EnsembleSpec {
    /// Runs member `index` on substream `(seed, index)`.
    pub fn run_member(&self, index: u64) -> Result<TrajectorySummary> {
        let rng = substream(self.seed, index);
        match &self.engine {
            Engine::Markov => {
                let mut p = MarkovProcess::new(&self.params, self.initial.clone(), rng)?;
                summarize(&mut p, index, self.horizon, &self.probes, self.retain_paths)
            }
            Engine::SemiMarkov(waits) => {
                let mut p = SemiMarkovProcess::new(&self.params, waits, self.initial.clone(), rng)?;
                summarize(&mut p, index, self.horizon, &self.probes, self.retain_paths)
            }
        }
    }
}

/// Runs `spec.count` independent members in parallel on the current rayon
/// pool. Output is ordered by member index regardless of scheduling.
pub fn simulate_ensemble(spec: &EnsembleSpec) -> Result<Vec<TrajectorySummary>> {
    if spec.count == 0 {
        return Err(Error::InvalidParameter("ensemble size must be ≥ 1".into()));
    }
    (0..spec.count as u64).into_par_iter().map(|i| spec.run_member(i)).collect()
}

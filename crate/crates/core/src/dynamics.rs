//! Opinion formation over time with a temporary stubborn external agent.
//!
//! The external agent always holds opinion 1 and permanent agents start at
//! 0, so every opinion stays in `[0, 1]` and the limiting opinion equals the
//! external agent's social influence.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    dot, mat_vec, scaled_weight, ExtendedMatrix, InteractionMatrix, LinalgError, OpinionVector,
};
use crate::rng::DetRng;

/// Opinion held by the external agent.
pub const EXTERNAL_OPINION: f64 = 1.0;
pub const DEFAULT_HORIZON: u64 = 3000;
pub const DEFAULT_EPSILON: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("lambda must lie strictly between 0 and 1, got {0}")]
    InvalidLambda(f64),
    #[error("invalid targets: {0}")]
    InvalidTargets(String),
    #[error("uniform range [{lo}, {hi}] holds fewer than k = {k} rounds")]
    RangeTooSmall { lo: u64, hi: u64, k: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn check_lambda(lambda: f64) -> Result<(), DynamicsError> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(DynamicsError::InvalidLambda(lambda))
    }
}

/// Sorted, duplicate-free set of 0-based agent indices the external agent
/// can influence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TargetSet(Vec<usize>);

impl TargetSet {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self, DynamicsError> {
        indices.sort_unstable();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(DynamicsError::InvalidTargets(format!(
                "index {bad} out of range for {n} agents"
            )));
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(DynamicsError::InvalidTargets("duplicate index".into()));
        }
        Ok(TargetSet(indices))
    }

    pub fn all(n: usize) -> Self {
        TargetSet((0..n).collect())
    }

    pub fn empty() -> Self {
        TargetSet(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    fn mask(&self, n: usize) -> Result<Vec<bool>, DynamicsError> {
        if let Some(&last) = self.0.last() {
            if last >= n {
                return Err(DynamicsError::InvalidTargets(format!(
                    "index {last} out of range for {n} agents"
                )));
            }
        }
        let mut mask = vec![false; n];
        for &i in &self.0 {
            mask[i] = true;
        }
        Ok(mask)
    }
}

/// When the external agent participates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Timing {
    /// After the permanent agents have reached consensus, each time.
    Consensus,
    /// The first `k` rounds.
    Start,
    /// `k` distinct rounds drawn uniformly from a range.
    Uniform,
}

impl Timing {
    pub const ALL: [Timing; 3] = [Timing::Consensus, Timing::Start, Timing::Uniform];

    pub fn as_str(self) -> &'static str {
        match self {
            Timing::Consensus => "consensus",
            Timing::Start => "start",
            Timing::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Timing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Timing {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "consensus" => Ok(Timing::Consensus),
            "start" => Ok(Timing::Start),
            "uniform" => Ok(Timing::Uniform),
            other => Err(format!("unknown timing option {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnapshotPolicy {
    /// Every round.
    #[default]
    Full,
    /// Initial state, state after each intervention, final state.
    Key,
}

/// One fully specified experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub matrix: InteractionMatrix,
    pub targets: TargetSet,
    pub lambda: f64,
    pub k: usize,
    pub timing: Timing,
    /// Total round budget, interventions included.
    pub horizon: u64,
    /// Inclusive range for uniform timing; `None` means `[1, horizon / 2]`.
    pub uniform_range: Option<(u64, u64)>,
    pub epsilon: f64,
    pub seed: u64,
    pub snapshots: SnapshotPolicy,
}

impl Scenario {
    pub fn new(
        matrix: InteractionMatrix,
        targets: TargetSet,
        lambda: f64,
        k: usize,
        timing: Timing,
    ) -> Self {
        Scenario {
            matrix,
            targets,
            lambda,
            k,
            timing,
            horizon: DEFAULT_HORIZON,
            uniform_range: None,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
            snapshots: SnapshotPolicy::Full,
        }
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_uniform_range(mut self, lo: u64, hi: u64) -> Self {
        self.uniform_range = Some((lo, hi));
        self
    }

    pub fn with_snapshots(mut self, policy: SnapshotPolicy) -> Self {
        self.snapshots = policy;
        self
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn resolved_uniform_range(&self) -> (u64, u64) {
        self.uniform_range.unwrap_or((1, (self.horizon / 2).max(1)))
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        check_lambda(self.lambda)?;
        self.targets.mask(self.n())?;
        if !(self.epsilon > 0.0) {
            return Err(DynamicsError::InvalidScenario(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.horizon == 0 {
            return Err(DynamicsError::InvalidScenario(
                "horizon must be positive".into(),
            ));
        }
        if let Some((lo, hi)) = self.uniform_range {
            if lo == 0 || lo > hi || hi > self.horizon {
                return Err(DynamicsError::InvalidScenario(format!(
                    "uniform range [{lo}, {hi}] must lie within [1, {}]",
                    self.horizon
                )));
            }
        }
        Ok(())
    }
}

/// Resolved participation plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InterventionSchedule {
    /// Fixed 1-based round indices, sorted and distinct.
    Explicit(Vec<u64>),
    /// Intervene each time consensus is reached, `remaining` more times.
    ConsensusTriggered { remaining: usize },
}

impl InterventionSchedule {
    pub fn explicit(mut rounds: Vec<u64>) -> Result<Self, DynamicsError> {
        rounds.sort_unstable();
        if rounds.first() == Some(&0) {
            return Err(DynamicsError::InvalidSchedule("rounds are 1-based".into()));
        }
        if rounds.windows(2).any(|w| w[0] == w[1]) {
            return Err(DynamicsError::InvalidSchedule("duplicate round".into()));
        }
        Ok(InterventionSchedule::Explicit(rounds))
    }

    /// Number of interventions the schedule will make.
    pub fn len(&self) -> usize {
        match self {
            InterventionSchedule::Explicit(r) => r.len(),
            InterventionSchedule::ConsensusTriggered { remaining } => *remaining,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn build_schedule(scenario: &Scenario) -> Result<InterventionSchedule, DynamicsError> {
    scenario.validate()?;
    let k = scenario.k;
    match scenario.timing {
        Timing::Consensus => Ok(InterventionSchedule::ConsensusTriggered { remaining: k }),
        Timing::Start => {
            if k as u64 > scenario.horizon {
                return Err(DynamicsError::RangeTooSmall {
                    lo: 1,
                    hi: scenario.horizon,
                    k,
                });
            }
            Ok(InterventionSchedule::Explicit((1..=k as u64).collect()))
        }
        Timing::Uniform => {
            let (lo, hi) = scenario.resolved_uniform_range();
            if hi < lo || ((hi - lo + 1) as u128) < k as u128 {
                return Err(DynamicsError::RangeTooSmall { lo, hi, k });
            }
            let mut rng = DetRng::new(scenario.seed);
            Ok(InterventionSchedule::Explicit(
                rng.sample_distinct(lo, hi, k),
            ))
        }
    }
}

/// Builds the extended matrix `A` for `targets` at intensity `lambda`.
pub fn extend_matrix(
    t: &InteractionMatrix,
    targets: &TargetSet,
    lambda: f64,
) -> Result<ExtendedMatrix, DynamicsError> {
    check_lambda(lambda)?;
    let mask = targets.mask(t.n())?;
    Ok(ExtendedMatrix::from_parts(t.clone(), mask, lambda))
}

/// Plain round, `p <- T p`.
pub fn step_plain(
    t: &InteractionMatrix,
    p: &OpinionVector,
) -> Result<OpinionVector, DynamicsError> {
    Ok(mat_vec(t, p)?)
}

/// Intervened round, `p <- (T - lambda (T)_m) p + Lambda` with the external
/// opinion fixed at 1. Rounds identically to `A (p; 1)` restricted to the
/// first `n` entries.
pub fn step_intervened(
    t: &InteractionMatrix,
    targets: &TargetSet,
    lambda: f64,
    p: &OpinionVector,
) -> Result<OpinionVector, DynamicsError> {
    check_lambda(lambda)?;
    let mask = targets.mask(t.n())?;
    check_len(t, p)?;
    let mut scaled = vec![0.0; t.n()];
    let values = t
        .rows()
        .zip(&mask)
        .map(|(row, &targeted)| {
            if targeted {
                for (s, &w) in scaled.iter_mut().zip(row) {
                    *s = scaled_weight(w, lambda);
                }
                dot(&scaled, p.as_slice()) + lambda * EXTERNAL_OPINION
            } else {
                dot(row, p.as_slice())
            }
        })
        .collect();
    Ok(OpinionVector::new(values))
}

/// Full-coverage intervened round, `p <- (1 - lambda) T p + lambda`.
pub fn step_full_coverage(
    t: &InteractionMatrix,
    lambda: f64,
    p: &OpinionVector,
) -> Result<OpinionVector, DynamicsError> {
    check_lambda(lambda)?;
    check_len(t, p)?;
    Ok(OpinionVector::new(
        t.rows()
            .map(|row| (1.0 - lambda) * dot(row, p.as_slice()) + lambda * EXTERNAL_OPINION)
            .collect(),
    ))
}

fn check_len(t: &InteractionMatrix, p: &OpinionVector) -> Result<(), DynamicsError> {
    if p.len() != t.n() {
        return Err(LinalgError::DimensionMismatch {
            expected: t.n(),
            actual: p.len(),
        }
        .into());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusRun {
    pub opinions: OpinionVector,
    pub rounds: u64,
    pub converged: bool,
}

/// Plain rounds until the consensus gap is at most `epsilon` or
/// `max_rounds` rounds have run. Non-convergence is reported, not raised.
pub fn run_to_consensus(
    t: &InteractionMatrix,
    p: &OpinionVector,
    epsilon: f64,
    max_rounds: u64,
) -> Result<ConsensusRun, DynamicsError> {
    if !(epsilon > 0.0) {
        return Err(DynamicsError::InvalidScenario(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    check_len(t, p)?;
    let mut state = Engine::new(t, None, p.clone(), SnapshotPolicy::Key);
    let converged = state.settle(epsilon, max_rounds);
    Ok(ConsensusRun {
        opinions: OpinionVector::new(state.current),
        rounds: state.round,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Rounds completed when the snapshot was taken; 0 is the initial state.
    pub round: u64,
    /// Whether this round was an intervened one.
    pub intervened: bool,
    pub opinions: OpinionVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub snapshots: Vec<Snapshot>,
    pub rounds_executed: u64,
    /// Realized 1-based intervention rounds.
    pub intervention_rounds: Vec<u64>,
    pub converged: bool,
    /// Set when the round budget ran out before the run finished.
    pub horizon_exhausted: bool,
    pub final_gap: f64,
}

impl SimulationTrace {
    pub fn final_opinions(&self) -> &OpinionVector {
        &self
            .snapshots
            .last()
            .expect("trace always holds the initial state")
            .opinions
    }

    /// Columns `round,agent_index,opinion,intervened_flag`; one line per
    /// agent per snapshot.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "agent_index", "opinion", "intervened_flag"])?;
        for snap in &self.snapshots {
            for (i, x) in snap.opinions.as_slice().iter().enumerate() {
                w.write_record([
                    snap.round.to_string(),
                    i.to_string(),
                    format!("{x:?}"),
                    u8::from(snap.intervened).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Mutable simulation state shared by every driver.
struct Engine<'a> {
    t: &'a InteractionMatrix,
    ext: Option<&'a ExtendedMatrix>,
    current: Vec<f64>,
    next: Vec<f64>,
    round: u64,
    policy: SnapshotPolicy,
    snapshots: Vec<Snapshot>,
    interventions: Vec<u64>,
    /// Still at the all-zero initial state, where plain rounds are no-ops.
    pristine: bool,
}

impl<'a> Engine<'a> {
    fn new(
        t: &'a InteractionMatrix,
        ext: Option<&'a ExtendedMatrix>,
        p: OpinionVector,
        policy: SnapshotPolicy,
    ) -> Self {
        let current = p.into_inner();
        let pristine = current.iter().all(|&x| x == 0.0);
        let snapshots = vec![Snapshot {
            round: 0,
            intervened: false,
            opinions: OpinionVector::new(current.clone()),
        }];
        Engine {
            t,
            ext,
            next: vec![0.0; current.len()],
            current,
            round: 0,
            policy,
            snapshots,
            interventions: Vec::new(),
            pristine,
        }
    }

    fn gap(&self) -> f64 {
        let (lo, hi) = self
            .current
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        hi - lo
    }

    fn record(&mut self, intervened: bool) {
        if self.policy == SnapshotPolicy::Full || intervened {
            self.snapshots.push(Snapshot {
                round: self.round,
                intervened,
                opinions: OpinionVector::new(self.current.clone()),
            });
        }
    }

    fn plain(&mut self) {
        self.round += 1;
        if !self.pristine {
            for (out, row) in self.next.iter_mut().zip(self.t.rows()) {
                *out = dot(row, &self.current);
            }
            std::mem::swap(&mut self.current, &mut self.next);
        }
        self.record(false);
    }

    fn intervene(&mut self) {
        let ext = self
            .ext
            .expect("intervened round without an extended matrix");
        let n = self.t.n();
        let lambda = ext.lambda();
        self.round += 1;
        for (i, (out, row)) in self.next.iter_mut().zip(self.t.rows()).enumerate() {
            *out = if ext.is_targeted(i) {
                dot(&ext.row(i)[..n], &self.current) + lambda * EXTERNAL_OPINION
            } else {
                dot(row, &self.current)
            };
        }
        std::mem::swap(&mut self.current, &mut self.next);
        self.pristine = false;
        self.interventions.push(self.round);
        self.record(true);
    }

    /// Plain rounds until the gap is within `epsilon`, spending at most
    /// `budget` rounds.
    fn settle(&mut self, epsilon: f64, budget: u64) -> bool {
        let stop = self.round + budget;
        loop {
            if self.gap() <= epsilon {
                return true;
            }
            if self.round >= stop {
                return false;
            }
            self.plain();
        }
    }

    fn finish(mut self, converged: bool, horizon_exhausted: bool) -> SimulationTrace {
        if self.snapshots.last().map(|s| s.round) != Some(self.round) {
            self.snapshots.push(Snapshot {
                round: self.round,
                intervened: false,
                opinions: OpinionVector::new(self.current.clone()),
            });
        }
        let final_gap = self.gap();
        SimulationTrace {
            snapshots: self.snapshots,
            rounds_executed: self.round,
            intervention_rounds: self.interventions,
            converged,
            horizon_exhausted,
            final_gap,
        }
    }
}

/// Runs `scenario` from all-zero opinions using its own schedule.
pub fn simulate(scenario: &Scenario) -> Result<SimulationTrace, DynamicsError> {
    let schedule = build_schedule(scenario)?;
    simulate_with_schedule(scenario, &schedule)
}

/// Runs `scenario` from all-zero opinions with an externally supplied
/// schedule; `scenario.k` and `scenario.timing` are ignored.
///
/// Explicit schedules run rounds `1..` applying intervened rounds where
/// scheduled, then plain rounds until consensus. Consensus-triggered
/// schedules alternate settling and a single intervened round, then settle
/// once more. Every round counts against `scenario.horizon`.
pub fn simulate_with_schedule(
    scenario: &Scenario,
    schedule: &InterventionSchedule,
) -> Result<SimulationTrace, DynamicsError> {
    scenario.validate()?;
    let ext = extend_matrix(&scenario.matrix, &scenario.targets, scenario.lambda)?;
    let horizon = scenario.horizon;
    let epsilon = scenario.epsilon;
    let mut engine = Engine::new(
        &scenario.matrix,
        Some(&ext),
        OpinionVector::zeros(scenario.n()),
        scenario.snapshots,
    );

    match schedule {
        InterventionSchedule::Explicit(rounds) => {
            let last = rounds.last().copied().unwrap_or(0);
            if last > horizon {
                return Err(DynamicsError::InvalidSchedule(format!(
                    "round {last} lies beyond the horizon {horizon}"
                )));
            }
            let mut pending = rounds.iter().peekable();
            while engine.round < last {
                if pending.peek().is_some_and(|&&r| r == engine.round + 1) {
                    pending.next();
                    engine.intervene();
                } else {
                    engine.plain();
                }
            }
            let converged = engine.settle(epsilon, horizon - engine.round);
            Ok(engine.finish(converged, !converged))
        }
        InterventionSchedule::ConsensusTriggered { remaining } => {
            for _ in 0..*remaining {
                let budget = horizon - engine.round;
                if !engine.settle(epsilon, budget) || engine.round >= horizon {
                    return Ok(engine.finish(false, true));
                }
                engine.intervene();
            }
            let converged = engine.settle(epsilon, horizon - engine.round);
            Ok(engine.finish(converged, !converged))
        }
    }
}

//! Batch sweeps over duration, coverage or intensity, comparing timing
//! options across seeded replications.

mod config;
mod output;
pub mod verify;

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

pub use config::{parse_timings, parse_values, Factor, SweepConfig, TargetSelection};
pub use output::{
    emit_csv, emit_plot_data, emit_svg, read_csv, write_csv, write_plot_data, write_provenance,
    write_svg,
};

use crate::analytics::{default_social_influence, measured_influence, AnalyticsError};
use crate::dynamics::{simulate, DynamicsError, Scenario, SnapshotPolicy, TargetSet, Timing};
use crate::linalg::{InteractionMatrix, LinalgError};
use crate::netgen::{generate_interaction_matrix, NetgenError, NetworkSpec};
use crate::rng::{derive_seed, DetRng};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("need at least two timing options to compare, found {0}")]
    InsufficientData(usize),
    #[error("malformed report csv: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Netgen(#[from] NetgenError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

/// Stream tags for [`derive_seed`].
const STREAM_TARGETS: u64 = 1;
const STREAM_SCHEDULE: u64 = 2;

/// Seed of the network used by replication `rep`.
pub fn network_seed(base_seed: u64, rep: usize) -> u64 {
    derive_seed(base_seed, &[rep as u64])
}

/// Seed of the uniform-timing schedule for replication `rep` at sweep value
/// index `value_index`.
pub fn schedule_seed(base_seed: u64, rep: usize, value_index: usize) -> u64 {
    derive_seed(
        base_seed,
        &[rep as u64, STREAM_SCHEDULE, value_index as u64],
    )
}

/// Aggregate over the replications of one (timing, value) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub timing: Timing,
    pub value: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 with fewer than two replications.
    pub std_dev: f64,
    /// Converged replications entering the mean.
    pub replications: usize,
    /// Replications that did not reach consensus within the horizon.
    pub nonconverged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub factor: Factor,
    /// Ordered by timing (as configured), then by sweep value.
    pub rows: Vec<ReportRow>,
    pub config_hash: String,
    pub base_seed: u64,
    pub replications: usize,
}

impl ReportTable {
    pub fn timings(&self) -> Vec<Timing> {
        let mut out: Vec<Timing> = Vec::new();
        for row in &self.rows {
            if !out.contains(&row.timing) {
                out.push(row.timing);
            }
        }
        out
    }

    pub fn values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for row in &self.rows {
            if !out.iter().any(|v| v.to_bits() == row.value.to_bits()) {
                out.push(row.value);
            }
        }
        out
    }

    pub fn get(&self, timing: Timing, value: f64) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.timing == timing && r.value.to_bits() == value.to_bits())
    }

    /// Means of one timing option in sweep order.
    pub fn series(&self, timing: Timing) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.timing == timing).collect()
    }
}

struct Replication {
    matrix: InteractionMatrix,
    /// Agents in selection order; coverage `m` takes the first `m`.
    ranking: Vec<usize>,
}

fn prepare_replication(config: &SweepConfig, rep: usize) -> Result<Replication, HarnessError> {
    let spec = NetworkSpec {
        seed: network_seed(config.base_seed, rep),
        ..config.network
    };
    let matrix = generate_interaction_matrix(&spec)?;
    let ranking = match config.target_selection {
        TargetSelection::Random => {
            let mut order: Vec<usize> = (0..spec.n).collect();
            DetRng::new(derive_seed(config.base_seed, &[rep as u64, STREAM_TARGETS]))
                .shuffle(&mut order);
            order
        }
        TargetSelection::TopInfluence => default_social_influence(&matrix)?.top(spec.n),
    };
    Ok(Replication { matrix, ranking })
}

/// Coverage fraction to a target count, `round(c n)` with halves away from 0.
pub fn coverage_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

/// One replication of one cell. `None` when the run did not converge.
fn run_cell(
    config: &SweepConfig,
    rep: &Replication,
    timing: Timing,
    value: f64,
    seed: u64,
) -> Result<Option<f64>, HarnessError> {
    let (lambda, coverage, k) = config.cell(value);
    let m = coverage_count(coverage, config.network.n);
    // nothing reaches the permanent agents
    if k == 0 || m == 0 || lambda == 0.0 {
        return Ok(Some(0.0));
    }
    let targets = TargetSet::new(rep.ranking[..m].to_vec(), config.network.n)?;
    let mut scenario = Scenario::new(rep.matrix.clone(), targets, lambda, k, timing)
        .with_horizon(config.horizon)
        .with_epsilon(config.epsilon)
        .with_seed(seed)
        .with_snapshots(SnapshotPolicy::Key);
    scenario.uniform_range = config.uniform_range;
    let trace = simulate(&scenario)?;
    match measured_influence(&trace) {
        Ok(x) => Ok(Some(x)),
        Err(AnalyticsError::NotConverged(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn aggregate(timing: Timing, value: f64, samples: &[Option<f64>]) -> ReportRow {
    let ok: Vec<f64> = samples.iter().flatten().copied().collect();
    let count = ok.len();
    let mean = if count == 0 {
        f64::NAN
    } else {
        ok.iter().sum::<f64>() / count as f64
    };
    let std_dev = if count < 2 {
        0.0
    } else {
        (ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
    };
    ReportRow {
        timing,
        value,
        mean,
        std_dev,
        replications: count,
        nonconverged: samples.len() - count,
    }
}

/// Runs every (timing, value, replication) job on the current rayon pool
/// and folds results in that order, so output does not depend on the pool
/// width.
///
/// Replication `r` uses the same network and target ranking across every
/// timing and value; only the uniform schedule varies with the value.
pub fn run_sweep(config: &SweepConfig) -> Result<ReportTable, HarnessError> {
    config.validate()?;
    let reps: Vec<Replication> = (0..config.replications)
        .into_par_iter()
        .map(|r| prepare_replication(config, r))
        .collect::<Result<_, _>>()?;

    let cells: Vec<(Timing, usize)> = config
        .timings
        .iter()
        .flat_map(|&t| (0..config.values.len()).map(move |v| (t, v)))
        .collect();
    let jobs: Vec<(Timing, usize, usize)> = cells
        .iter()
        .flat_map(|&(t, v)| (0..config.replications).map(move |r| (t, v, r)))
        .collect();

    let results: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(timing, vi, r)| {
            let seed = schedule_seed(config.base_seed, r, vi);
            run_cell(config, &reps[r], timing, config.values[vi], seed)
        })
        .collect::<Result<_, _>>()?;

    let rows = cells
        .iter()
        .zip(results.chunks(config.replications))
        .map(|(&(timing, vi), samples)| aggregate(timing, config.values[vi], samples))
        .collect();

    Ok(ReportTable {
        factor: config.factor,
        rows,
        config_hash: config.hash(),
        base_seed: config.base_seed,
        replications: config.replications,
    })
}

/// Timing comparison at one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueComparison {
    pub value: f64,
    pub means: BTreeMap<Timing, f64>,
    /// Timing options from largest to smallest mean.
    pub ordering: Vec<Timing>,
    pub consensus_minus_start: Option<f64>,
    pub consensus_minus_uniform: Option<f64>,
    /// Largest minus smallest mean across timing options.
    pub spread: f64,
    /// Set when consensus >= uniform >= start fails among present options.
    pub ordering_violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingComparison {
    pub factor: Factor,
    pub per_value: Vec<ValueComparison>,
}

impl TimingComparison {
    pub fn violations(&self) -> Vec<f64> {
        self.per_value
            .iter()
            .filter(|c| c.ordering_violated)
            .map(|c| c.value)
            .collect()
    }

    pub fn max_consensus_minus_start(&self) -> Option<f64> {
        self.per_value
            .iter()
            .filter_map(|c| c.consensus_minus_start)
            .fold(None, |acc, g| Some(acc.map_or(g, |a: f64| a.max(g))))
    }

    pub fn max_spread(&self) -> f64 {
        self.per_value.iter().map(|c| c.spread).fold(0.0, f64::max)
    }
}

pub fn compare_timing_options(table: &ReportTable) -> Result<TimingComparison, HarnessError> {
    let timings = table.timings();
    if timings.len() < 2 {
        return Err(HarnessError::InsufficientData(timings.len()));
    }
    let per_value = table
        .values()
        .into_iter()
        .map(|value| {
            let means: BTreeMap<Timing, f64> = timings
                .iter()
                .filter_map(|&t| table.get(t, value).map(|r| (t, r.mean)))
                // a cell with no converged replication has no mean to compare
                .filter(|(_, mean)| mean.is_finite())
                .collect();
            let mut ordering: Vec<Timing> = means.keys().copied().collect();
            ordering.sort_by(|a, b| means[b].total_cmp(&means[a]));
            let gap = |other: Timing| Some(means.get(&Timing::Consensus)? - means.get(&other)?);
            let spread = if means.is_empty() {
                0.0
            } else {
                means.values().copied().fold(f64::NEG_INFINITY, f64::max)
                    - means.values().copied().fold(f64::INFINITY, f64::min)
            };
            let chain: Vec<f64> = [Timing::Consensus, Timing::Uniform, Timing::Start]
                .iter()
                .filter_map(|t| means.get(t).copied())
                .collect();
            ValueComparison {
                value,
                ordering_violated: chain.windows(2).any(|w| !(w[0] >= w[1])),
                consensus_minus_start: gap(Timing::Start),
                consensus_minus_uniform: gap(Timing::Uniform),
                spread,
                ordering,
                means,
            }
        })
        .collect();
    Ok(TimingComparison {
        factor: table.factor,
        per_value,
    })
}

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::dynamics::{Timing, DEFAULT_EPSILON, DEFAULT_HORIZON};
use crate::netgen::NetworkSpec;

/// The factor varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    /// Number of intervened rounds, `k`.
    Duration,
    /// Fraction of agents targeted; `m = round(c n)`.
    Coverage,
    /// Weight on the external agent, `lambda`.
    Intensity,
}

impl Factor {
    pub fn as_str(self) -> &'static str {
        match self {
            Factor::Duration => "duration",
            Factor::Coverage => "coverage",
            Factor::Intensity => "intensity",
        }
    }

    /// 0..=45 step 1 for duration, 0..=0.9 step 0.1 otherwise.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            Factor::Duration => (0..=45).map(f64::from).collect(),
            Factor::Coverage | Factor::Intensity => (0..=9).map(|i| f64::from(i) / 10.0).collect(),
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Factor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "duration" | "k" => Ok(Factor::Duration),
            "coverage" | "m" => Ok(Factor::Coverage),
            "intensity" | "lambda" => Ok(Factor::Intensity),
            other => Err(format!("unknown factor {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSelection {
    /// A fresh random permutation per replication; coverage `c` takes its
    /// first `m` agents, so larger coverage extends smaller.
    Random,
    /// The `m` agents with the largest social influence.
    TopInfluence,
}

impl FromStr for TargetSelection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "random" => Ok(TargetSelection::Random),
            "top_influence" | "top" => Ok(TargetSelection::TopInfluence),
            other => Err(format!("unknown target selection {other:?}")),
        }
    }
}

/// Everything that determines a sweep's output. Loaded from TOML; fields
/// missing from the file keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// `seed` is ignored; each replication derives its own.
    pub network: NetworkSpec,
    pub replications: usize,
    pub horizon: u64,
    pub epsilon: f64,
    pub factor: Factor,
    pub values: Vec<f64>,
    /// Held intensity when not swept.
    pub lambda: f64,
    /// Held coverage fraction when not swept.
    pub coverage: f64,
    /// Held duration when not swept.
    pub duration: usize,
    pub timings: Vec<Timing>,
    pub target_selection: TargetSelection,
    /// Inclusive round range for uniform timing; defaults to `[1, horizon/2]`.
    pub uniform_range: Option<(u64, u64)>,
    pub base_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig::for_factor(Factor::Duration)
    }
}

impl SweepConfig {
    pub fn for_factor(factor: Factor) -> Self {
        SweepConfig {
            network: NetworkSpec::default(),
            replications: 1000,
            horizon: DEFAULT_HORIZON,
            epsilon: DEFAULT_EPSILON,
            factor,
            values: factor.default_values(),
            lambda: 0.1,
            coverage: 0.3,
            duration: 10,
            timings: Timing::ALL.to_vec(),
            target_selection: TargetSelection::Random,
            uniform_range: None,
            base_seed: 0,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        self.network
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.replications == 0 {
            return bad("replications must be positive".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.values.is_empty() {
            return bad("sweep needs at least one value".into());
        }
        if self.timings.is_empty() {
            return bad("sweep needs at least one timing option".into());
        }
        let mut seen = self.timings.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.timings.len() {
            return bad("timing options repeat".into());
        }
        if self.factor != Factor::Intensity && !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad(format!("lambda must lie in (0, 1), got {}", self.lambda));
        }
        if self.factor != Factor::Coverage && !(0.0..=1.0).contains(&self.coverage) {
            return bad(format!(
                "coverage must lie in [0, 1], got {}",
                self.coverage
            ));
        }
        for &v in &self.values {
            let ok = match self.factor {
                Factor::Duration => v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64,
                Factor::Coverage => (0.0..=1.0).contains(&v),
                Factor::Intensity => (0.0..1.0).contains(&v),
            };
            if !ok {
                return bad(format!("{} sweep value {v} out of range", self.factor));
            }
        }
        if let Some((lo, hi)) = self.uniform_range {
            if lo == 0 || lo > hi || hi > self.horizon {
                return bad(format!(
                    "uniform range [{lo}, {hi}] must lie within [1, {}]",
                    self.horizon
                ));
            }
        }
        Ok(())
    }

    /// `(lambda, coverage fraction, k)` for one sweep value.
    pub fn cell(&self, value: f64) -> (f64, f64, usize) {
        match self.factor {
            Factor::Duration => (self.lambda, self.coverage, value as usize),
            Factor::Coverage => (self.lambda, value, self.duration),
            Factor::Intensity => (value, self.coverage, self.duration),
        }
    }
}

/// Parses `a,b,c` or `start:stop:step` (inclusive stop).
pub fn parse_values(text: &str) -> Result<Vec<f64>, HarnessError> {
    let err = |m: String| HarnessError::Config(m);
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<f64> = text
            .split(':')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| err(format!("{p:?}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(err(format!("range {text:?} needs start:stop:step")));
        };
        if !(step > 0.0) || stop < start {
            return Err(err(format!(
                "range {text:?} is empty or has non-positive step"
            )));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // integer multiples keep 0.1 steps free of accumulated drift
        Ok((0..count)
            .map(|i| {
                let x = start + step * i as f64;
                (x * 1e12).round() / 1e12
            })
            .collect())
    } else {
        text.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| err(format!("{p:?}: {e}")))
            })
            .collect()
    }
}

pub fn parse_timings(text: &str) -> Result<Vec<Timing>, HarnessError> {
    text.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.parse::<Timing>().map_err(HarnessError::Config))
        .collect()
}

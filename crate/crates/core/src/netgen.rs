//! Random interaction matrices that are strongly connected and aperiodic by
//! construction, plus the two graph checks and a plain CSV matrix format.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{validate_stochastic, InteractionMatrix, LinalgError, DEFAULT_STOCHASTIC_TOL};
use crate::rng::DetRng;

/// Upper end of the self-weight draw.
pub const SELF_LOOP_MAX: f64 = 0.9;

#[derive(Debug, Error)]
pub enum NetgenError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("no valid matrix after {0} attempts")]
    GenerationFailure(usize),
    #[error("matrix is not strongly connected")]
    NotStronglyConnected,
    #[error("malformed matrix csv at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkSpec {
    pub n: usize,
    /// Probability of each directed edge beyond the backbone cycle.
    pub edge_density: f64,
    /// Lower end of the uniform self-weight draw.
    pub self_loop_min: f64,
    pub seed: u64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            n: 100,
            edge_density: 0.3,
            self_loop_min: 0.1,
            seed: 0,
        }
    }
}

impl NetworkSpec {
    pub fn new(n: usize, edge_density: f64, self_loop_min: f64, seed: u64) -> Self {
        NetworkSpec {
            n,
            edge_density,
            self_loop_min,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), NetgenError> {
        if self.n < 2 {
            return Err(NetgenError::InvalidSpec(format!(
                "n must be >= 2, got {}",
                self.n
            )));
        }
        if !(self.edge_density > 0.0 && self.edge_density <= 1.0) {
            return Err(NetgenError::InvalidSpec(format!(
                "edge_density must lie in (0, 1], got {}",
                self.edge_density
            )));
        }
        if !(self.self_loop_min > 0.0 && self.self_loop_min < 1.0) {
            return Err(NetgenError::InvalidSpec(format!(
                "self_loop_min must lie in (0, 1), got {}",
                self.self_loop_min
            )));
        }
        Ok(())
    }
}

/// Builds a random interaction matrix:
///
/// 1. a directed Hamiltonian cycle through a random permutation of agents,
/// 2. every other off-diagonal edge independently with probability
///    `edge_density`,
/// 3. a self-weight uniform in `[self_loop_min, 0.9]`,
/// 4. the rest of each row spread evenly over that row's off-diagonal edges.
///
/// The draws happen in exactly that order from one [`DetRng`] seeded with
/// `spec.seed` (edges scanned row-major, skipping the diagonal).
pub fn generate_interaction_matrix(spec: &NetworkSpec) -> Result<InteractionMatrix, NetgenError> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = DetRng::new(spec.seed);

    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut adjacent = vec![false; n * n];
    for w in 0..n {
        let (from, to) = (order[w], order[(w + 1) % n]);
        adjacent[from * n + to] = true;
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let u = rng.next_f64();
            if !adjacent[i * n + j] && u < spec.edge_density {
                adjacent[i * n + j] = true;
            }
        }
    }

    let hi = SELF_LOOP_MAX.max(spec.self_loop_min);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let self_weight = rng.uniform(spec.self_loop_min, hi);
        let degree = (0..n).filter(|&j| adjacent[i * n + j]).count();
        let share = (1.0 - self_weight) / degree as f64;
        let row: Vec<f64> = (0..n)
            .map(|j| {
                if j == i {
                    self_weight
                } else if adjacent[i * n + j] {
                    share
                } else {
                    0.0
                }
            })
            .collect();
        rows.push(row);
    }

    let matrix = validate_stochastic(&rows, DEFAULT_STOCHASTIC_TOL)?;
    if !is_strongly_connected(&matrix) || !is_aperiodic(&matrix)? {
        return Err(NetgenError::GenerationFailure(1));
    }
    Ok(matrix)
}

fn reach_all(n: usize, start: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for (v, seen_v) in seen.iter_mut().enumerate() {
            if !*seen_v && edge(u, v) {
                *seen_v = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == n
}

/// Edge `(i, j)` exists iff `t_ij > 0`. Strongly connected iff node 0
/// reaches every node in both the graph and its reverse.
pub fn is_strongly_connected(m: &InteractionMatrix) -> bool {
    let n = m.n();
    reach_all(n, 0, |u, v| m.get(u, v) > 0.0) && reach_all(n, 0, |u, v| m.get(v, u) > 0.0)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of a strongly connected graph, by BFS levels from node 0: the gcd
/// of `level(u) + 1 - level(v)` over all edges `(u, v)`.
pub fn period(m: &InteractionMatrix) -> Result<u64, NetgenError> {
    if !is_strongly_connected(m) {
        return Err(NetgenError::NotStronglyConnected);
    }
    let n = m.n();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if m.get(u, v) > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0u64;
    for u in 0..n {
        for v in 0..n {
            if m.get(u, v) > 0.0 {
                let diff = (level[u] as i64 + 1 - level[v] as i64).unsigned_abs();
                g = gcd(g, diff);
            }
        }
    }
    Ok(g)
}

pub fn is_aperiodic(m: &InteractionMatrix) -> Result<bool, NetgenError> {
    Ok(period(m)? == 1)
}

/// Writes one matrix row per line, entries comma-separated, in shortest
/// round-trip decimal form.
pub fn write_matrix_csv<W: Write>(m: &InteractionMatrix, mut out: W) -> Result<(), NetgenError> {
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Reads the format written by [`write_matrix_csv`]. Blank lines are skipped.
pub fn read_matrix_csv<R: BufRead>(input: R, tol: f64) -> Result<InteractionMatrix, NetgenError> {
    let mut rows = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                field.trim().parse::<f64>().map_err(|e| NetgenError::Parse {
                    line: idx + 1,
                    msg: format!("{field:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(validate_stochastic(&rows, tol)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> InteractionMatrix {
        validate_stochastic(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), 1e-12).unwrap()
    }

    #[test]
    fn full_density_pair_is_complete() {
        let t = generate_interaction_matrix(&NetworkSpec::new(2, 1.0, 0.1, 7)).unwrap();
        assert!(t.as_flat().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn sparse_spec_passes_validators() {
        let t = generate_interaction_matrix(&NetworkSpec::new(10, 0.3, 0.1, 1)).unwrap();
        assert!(is_strongly_connected(&t));
        assert!(is_aperiodic(&t).unwrap());
        assert!(validate_stochastic(&t.to_rows(), 1e-12).is_ok());
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let spec = NetworkSpec::new(25, 0.2, 0.1, 99);
        let a = generate_interaction_matrix(&spec).unwrap();
        let b = generate_interaction_matrix(&spec).unwrap();
        assert!(a
            .as_flat()
            .iter()
            .zip(b.as_flat())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = generate_interaction_matrix(&NetworkSpec { seed: 100, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn self_weights_in_range() {
        let t = generate_interaction_matrix(&NetworkSpec::new(30, 0.1, 0.25, 5)).unwrap();
        for i in 0..30 {
            assert!((0.25..SELF_LOOP_MAX).contains(&t.get(i, i)));
        }
    }

    #[test]
    fn spec_validation() {
        assert!(NetworkSpec::new(1, 0.5, 0.1, 0).validate().is_err());
        assert!(NetworkSpec::new(5, 0.0, 0.1, 0).validate().is_err());
        assert!(NetworkSpec::new(5, 1.5, 0.1, 0).validate().is_err());
        assert!(NetworkSpec::new(5, 0.5, 0.0, 0).validate().is_err());
        assert!(NetworkSpec::new(5, 0.5, 1.0, 0).validate().is_err());
    }

    #[test]
    fn connectivity_examples() {
        assert!(!is_strongly_connected(&m(&[&[1.0, 0.0], &[0.5, 0.5]])));
        assert!(is_strongly_connected(&m(&[&[0.0, 1.0], &[1.0, 0.0]])));
        assert!(is_strongly_connected(&m(&[&[0.5, 0.5], &[0.5, 0.5]])));
    }

    #[test]
    fn aperiodicity_examples() {
        assert!(!is_aperiodic(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap());
        assert!(is_aperiodic(&m(&[&[0.5, 0.5], &[1.0, 0.0]])).unwrap());
        let ring = m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        assert_eq!(period(&ring).unwrap(), 3);
        assert!(matches!(
            is_aperiodic(&m(&[&[1.0, 0.0], &[0.5, 0.5]])),
            Err(NetgenError::NotStronglyConnected)
        ));
    }

    #[test]
    fn mixed_cycle_lengths() {
        // cycles of length 2 (0-1-0) and 3 (0-1-2-0): gcd 1
        let t = m(&[&[0.0, 1.0, 0.0], &[0.5, 0.0, 0.5], &[1.0, 0.0, 0.0]]);
        assert!(is_aperiodic(&t).unwrap());
        // cycles of length 2 (0-1-0) and 4 (0-1-2-3-0) only: period 2
        let t = m(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[0.5, 0.0, 0.5, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[1.0, 0.0, 0.0, 0.0],
        ]);
        assert_eq!(period(&t).unwrap(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let t = generate_interaction_matrix(&NetworkSpec::new(6, 0.5, 0.1, 3)).unwrap();
        let mut buf = Vec::new();
        write_matrix_csv(&t, &mut buf).unwrap();
        let back = read_matrix_csv(buf.as_slice(), 1e-12).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn csv_reports_bad_field() {
        let err = read_matrix_csv("0.5,0.5\n0.5,abc\n".as_bytes(), 1e-12).unwrap_err();
        assert!(matches!(err, NetgenError::Parse { line: 2, .. }));
    }
}

//! Dense row-stochastic matrices and opinion vectors.

use std::fmt;

use thiserror::Error;

/// Default tolerance on row sums.
pub const DEFAULT_STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is empty")]
    Empty,
    #[error("matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, off by more than {tol}")]
    RowSumViolation { row: usize, sum: f64, tol: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("empty opinion vector")]
    EmptyVector,
}

/// Row-stochastic `n x n` interaction matrix `T`, stored dense row-major.
///
/// Entry `(i, j)` is the weight agent `i` places on agent `j`; agents are
/// indexed from 0.
#[derive(Clone, PartialEq)]
pub struct InteractionMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl InteractionMatrix {
    /// Validates a flat row-major buffer of length `n * n`.
    pub fn from_flat(n: usize, entries: Vec<f64>, tol: f64) -> Result<Self, LinalgError> {
        if n == 0 {
            return Err(LinalgError::Empty);
        }
        if entries.len() != n * n {
            return Err(LinalgError::DimensionMismatch {
                expected: n * n,
                actual: entries.len(),
            });
        }
        if !(tol > 0.0) {
            return Err(LinalgError::InvalidTolerance(tol));
        }
        for (row, chunk) in entries.chunks_exact(n).enumerate() {
            for (col, &value) in chunk.iter().enumerate() {
                if !value.is_finite() {
                    return Err(LinalgError::NonFinite { row, col });
                }
                if value < 0.0 {
                    return Err(LinalgError::NegativeEntry { row, col, value });
                }
            }
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(LinalgError::RowSumViolation { row, sum, tol });
            }
        }
        Ok(InteractionMatrix { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.n)
    }

    /// Row-major entries.
    pub fn as_flat(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// True when every column also sums to 1 within `tol`.
    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        (0..self.n).all(|j| {
            let col: f64 = (0..self.n).map(|i| self.get(i, j)).sum();
            (col - 1.0).abs() <= tol
        })
    }
}

impl fmt::Debug for InteractionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

/// Checks that `rows` is a square, non-negative, row-stochastic array.
pub fn validate_stochastic(rows: &[Vec<f64>], tol: f64) -> Result<InteractionMatrix, LinalgError> {
    let n = rows.len();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    let mut flat = Vec::with_capacity(n * n);
    for (row, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(LinalgError::NotSquare {
                row,
                len: r.len(),
                n,
            });
        }
        flat.extend_from_slice(r);
    }
    InteractionMatrix::from_flat(n, flat, tol)
}

/// Opinions of the permanent agents.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionVector(Vec<f64>);

impl OpinionVector {
    pub fn new(values: Vec<f64>) -> Self {
        OpinionVector(values)
    }

    pub fn zeros(n: usize) -> Self {
        OpinionVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl From<Vec<f64>> for OpinionVector {
    fn from(values: Vec<f64>) -> Self {
        OpinionVector(values)
    }
}

impl std::ops::Index<usize> for OpinionVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Left-to-right dot product. Every averaging round in the crate goes
/// through here so that equivalent formulations round identically.
#[inline]
pub(crate) fn dot(row: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (w, x) in row.iter().zip(v) {
        acc += w * x;
    }
    acc
}

/// One synchronous averaging round: `result_i = sum_j M_ij v_j`.
pub fn mat_vec(m: &InteractionMatrix, v: &OpinionVector) -> Result<OpinionVector, LinalgError> {
    if v.len() != m.n {
        return Err(LinalgError::DimensionMismatch {
            expected: m.n,
            actual: v.len(),
        });
    }
    Ok(OpinionVector(m.rows().map(|row| dot(row, &v.0)).collect()))
}

/// `max_i v_i - min_i v_i`.
pub fn consensus_gap(v: &OpinionVector) -> Result<f64, LinalgError> {
    if v.is_empty() {
        return Err(LinalgError::EmptyVector);
    }
    Ok(v.max() - v.min())
}

/// Weight a targeted agent keeps on permanent agent `j`: `(1 - lambda) t_ij`.
#[inline]
pub(crate) fn scaled_weight(t: f64, lambda: f64) -> f64 {
    (1.0 - lambda) * t
}

/// The `(n+1) x (n+1)` matrix `A` that appends the stubborn external agent
/// as the last row and column.
///
/// Targets keep their original indices; the block layout with targets first
/// is recovered by permuting agents so that the targets lead.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedMatrix {
    base: InteractionMatrix,
    targeted: Vec<bool>,
    lambda: f64,
    entries: Vec<f64>,
}

impl ExtendedMatrix {
    /// Builds `A` from already-validated parts. `targeted` has length `n`.
    pub(crate) fn from_parts(base: InteractionMatrix, targeted: Vec<bool>, lambda: f64) -> Self {
        let n = base.n();
        let dim = n + 1;
        let mut entries = vec![0.0; dim * dim];
        for i in 0..n {
            let out = &mut entries[i * dim..(i + 1) * dim];
            if targeted[i] {
                for (o, &t) in out.iter_mut().zip(base.row(i)) {
                    *o = scaled_weight(t, lambda);
                }
                out[n] = lambda;
            } else {
                out[..n].copy_from_slice(base.row(i));
            }
        }
        entries[n * dim + n] = 1.0;
        ExtendedMatrix {
            base,
            targeted,
            lambda,
            entries,
        }
    }

    pub fn base(&self) -> &InteractionMatrix {
        &self.base
    }

    /// Count of targeted agents (`m`).
    pub fn m(&self) -> usize {
        self.targeted.iter().filter(|&&t| t).count()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_targeted(&self, i: usize) -> bool {
        self.targeted[i]
    }

    /// Side length, `n + 1`.
    pub fn dim(&self) -> usize {
        self.base.n() + 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let dim = self.dim();
        &self.entries[i * dim..(i + 1) * dim]
    }

    /// First `n` entries of `A (p; a)`.
    pub fn apply(&self, p: &OpinionVector, a: f64) -> Result<OpinionVector, LinalgError> {
        let n = self.base.n();
        if p.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                actual: p.len(),
            });
        }
        let mut extended = Vec::with_capacity(n + 1);
        extended.extend_from_slice(p.as_slice());
        extended.push(a);
        Ok(OpinionVector(
            (0..n).map(|i| dot(self.row(i), &extended)).collect(),
        ))
    }
}

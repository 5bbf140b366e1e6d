//! C ABI over `opinion_influence`.
//!
//! Every fallible function returns an [`OiStatus`]; on anything but
//! `OI_OK` a message is available from [`oi_last_error`] on the same thread.
//! Matrices live behind the opaque [`OiMatrix`] handle and must be released
//! with [`oi_matrix_free`]. Agents are 0-indexed.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use opinion_influence::analytics::{self, AnalyticsError};
use opinion_influence::dynamics::{
    self, DynamicsError, Scenario, SnapshotPolicy, TargetSet, Timing,
};
use opinion_influence::linalg::{InteractionMatrix, LinalgError, OpinionVector};
use opinion_influence::netgen::{self, NetgenError, NetworkSpec};

pub const OI_TIMING_CONSENSUS: u32 = 0;
pub const OI_TIMING_START: u32 = 1;
pub const OI_TIMING_UNIFORM: u32 = 2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OiStatus {
    OiOk = 0,
    OiNullPointer = 1,
    OiInvalidArgument = 2,
    /// Matrix entries are negative, non-finite, or rows do not sum to 1.
    OiNotStochastic = 3,
    /// Power iteration hit its iteration cap.
    OiNoConvergence = 4,
    /// The simulation ran out of rounds before reaching consensus.
    OiNotConverged = 5,
    OiGenerationFailure = 6,
    OiPanic = 7,
}

/// Opaque row-stochastic interaction matrix.
pub struct OiMatrix(InteractionMatrix);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OiReport {
    /// Mean limiting opinion.
    pub measured: f64,
    /// `1 - (1 - s lambda)^k` for the combined influence of the targets.
    pub predicted: f64,
    pub s_combined: f64,
    pub abs_error: f64,
    pub rounds_executed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(OiStatus, String);

impl From<LinalgError> for Failure {
    fn from(e: LinalgError) -> Self {
        let status = match e {
            LinalgError::NonFinite { .. }
            | LinalgError::NegativeEntry { .. }
            | LinalgError::RowSumViolation { .. } => OiStatus::OiNotStochastic,
            _ => OiStatus::OiInvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<DynamicsError> for Failure {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Linalg(inner) => inner.into(),
            other => Failure(OiStatus::OiInvalidArgument, other.to_string()),
        }
    }
}

impl From<AnalyticsError> for Failure {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::NoConvergence { .. } => {
                Failure(OiStatus::OiNoConvergence, e.to_string())
            }
            AnalyticsError::NotConverged(_) => Failure(OiStatus::OiNotConverged, e.to_string()),
            AnalyticsError::Linalg(inner) => inner.into(),
            AnalyticsError::Dynamics(inner) => inner.into(),
            AnalyticsError::Domain(_) => Failure(OiStatus::OiInvalidArgument, e.to_string()),
        }
    }
}

impl From<NetgenError> for Failure {
    fn from(e: NetgenError) -> Self {
        match e {
            NetgenError::Linalg(inner) => inner.into(),
            NetgenError::GenerationFailure(_) => {
                Failure(OiStatus::OiGenerationFailure, e.to_string())
            }
            other => Failure(OiStatus::OiInvalidArgument, other.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(OiStatus::OiInvalidArgument, msg.into())
}

fn null(name: &str) -> Failure {
    Failure(OiStatus::OiNullPointer, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            OiStatus::OiOk
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            OiStatus::OiPanic
        }
    }
}

unsafe fn matrix_ref<'a>(m: *const OiMatrix) -> Result<&'a InteractionMatrix, Failure> {
    m.as_ref().map(|m| &m.0).ok_or_else(|| null("matrix"))
}

unsafe fn input<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn targets_from(ptr: *const usize, len: usize, n: usize) -> Result<TargetSet, Failure> {
    Ok(TargetSet::new(input(ptr, len, "targets")?.to_vec(), n)?)
}

fn timing_from(code: u32) -> Result<Timing, Failure> {
    match code {
        OI_TIMING_CONSENSUS => Ok(Timing::Consensus),
        OI_TIMING_START => Ok(Timing::Start),
        OI_TIMING_UNIFORM => Ok(Timing::Uniform),
        other => Err(invalid(format!("unknown timing code {other}"))),
    }
}

unsafe fn store(out: *mut *mut OiMatrix, m: InteractionMatrix) {
    *out = Box::into_raw(Box::new(OiMatrix(m)));
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library from the
/// same thread. Never null.
#[no_mangle]
pub extern "C" fn oi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a matrix from `n * n` row-major entries, checking each row sums to
/// 1 within `tol`.
///
/// # Safety
/// `entries` must point to `n * n` readable doubles and `out` to writable
/// storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn oi_matrix_new(
    entries: *const f64,
    n: usize,
    tol: f64,
    out: *mut *mut OiMatrix,
) -> OiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n.checked_mul(n).ok_or_else(|| invalid("n * n overflows"))?;
        let flat = input(entries, len, "entries")?.to_vec();
        store(out, InteractionMatrix::from_flat(n, flat, tol)?);
        Ok(())
    })
}

/// Random strongly connected, aperiodic matrix; same seed, same matrix.
///
/// # Safety
/// `out` must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn oi_matrix_generate(
    n: usize,
    edge_density: f64,
    self_loop_min: f64,
    seed: u64,
    out: *mut *mut OiMatrix,
) -> OiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = NetworkSpec::new(n, edge_density, self_loop_min, seed);
        store(out, netgen::generate_interaction_matrix(&spec)?);
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `m` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oi_matrix_free(m: *mut OiMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of agents, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn oi_matrix_dim(m: *const OiMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.n())
}

/// Copies the `n * n` row-major entries into `out`, which holds `len` doubles.
///
/// # Safety
/// `m` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn oi_matrix_copy_entries(
    m: *const OiMatrix,
    out: *mut f64,
    len: usize,
) -> OiStatus {
    guard(|| {
        let t = matrix_ref(m)?;
        let flat = t.as_flat();
        if len != flat.len() {
            return Err(invalid(format!(
                "buffer holds {len} doubles, need {}",
                flat.len()
            )));
        }
        output(out, len, "out")?.copy_from_slice(flat);
        Ok(())
    })
}

/// Writes 1 to `out` when every agent reaches every other, else 0.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oi_is_strongly_connected(m: *const OiMatrix, out: *mut bool) -> OiStatus {
    guard(|| {
        let t = matrix_ref(m)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = netgen::is_strongly_connected(t);
        Ok(())
    })
}

/// Writes 1 to `out` when the graph has period 1. Fails with
/// `OI_INVALID_ARGUMENT` on a matrix that is not strongly connected.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oi_is_aperiodic(m: *const OiMatrix, out: *mut bool) -> OiStatus {
    guard(|| {
        let t = matrix_ref(m)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = netgen::is_aperiodic(t)?;
        Ok(())
    })
}

/// Left Perron vector `s` with `s T = s`, `sum(s) = 1`, to `tol` in the
/// infinity norm.
///
/// # Safety
/// `m` must be a live handle and `out` must point to `len` writable doubles,
/// `len` equal to the matrix dimension.
#[no_mangle]
pub unsafe extern "C" fn oi_social_influence_vector(
    m: *const OiMatrix,
    tol: f64,
    max_iter: usize,
    out: *mut f64,
    len: usize,
) -> OiStatus {
    guard(|| {
        let t = matrix_ref(m)?;
        if len != t.n() {
            return Err(invalid(format!(
                "buffer holds {len} doubles, need {}",
                t.n()
            )));
        }
        let s = analytics::social_influence_vector(t, tol, max_iter)?;
        output(out, len, "out")?.copy_from_slice(s.weights());
        Ok(())
    })
}

/// `1 - (1 - s lambda)^k`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oi_closed_form_influence(
    k: u64,
    lambda: f64,
    s_combined: f64,
    out: *mut f64,
) -> OiStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = analytics::closed_form_influence(k, lambda, s_combined)?;
        Ok(())
    })
}

/// One round with the external agent (opinion 1) present:
/// targeted agents scale their row by `1 - lambda` and add `lambda`.
///
/// # Safety
/// `m` must be a live handle; `targets` must hold `targets_len` indices;
/// `opinions` and `out` must each hold `n` doubles and may alias.
#[no_mangle]
pub unsafe extern "C" fn oi_step_intervened(
    m: *const OiMatrix,
    targets: *const usize,
    targets_len: usize,
    lambda: f64,
    opinions: *const f64,
    out: *mut f64,
    n: usize,
) -> OiStatus {
    guard(|| {
        let t = matrix_ref(m)?;
        if n != t.n() {
            return Err(invalid(format!(
                "opinion length {n} does not match matrix dimension {}",
                t.n()
            )));
        }
        let targets = targets_from(targets, targets_len, t.n())?;
        let p = OpinionVector::new(input(opinions, n, "opinions")?.to_vec());
        let next = dynamics::step_intervened(t, &targets, lambda, &p)?;
        output(out, n, "out")?.copy_from_slice(next.as_slice());
        Ok(())
    })
}

/// Runs a full simulation from all-zero opinions and compares the limiting
/// mean opinion with the closed form.
///
/// # Safety
/// `m` must be a live handle, `targets` must hold `targets_len` indices and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn oi_simulate(
    m: *const OiMatrix,
    targets: *const usize,
    targets_len: usize,
    lambda: f64,
    k: usize,
    timing: u32,
    horizon: u64,
    seed: u64,
    out: *mut OiReport,
) -> OiStatus {
    guard(|| {
        let t = matrix_ref(m)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let targets = targets_from(targets, targets_len, t.n())?;
        let scenario = Scenario::new(t.clone(), targets, lambda, k, timing_from(timing)?)
            .with_horizon(horizon)
            .with_seed(seed)
            .with_snapshots(SnapshotPolicy::Key);
        let (report, _) = analytics::influence_report(&scenario)?;
        *out = OiReport {
            measured: report.measured,
            predicted: report.predicted,
            s_combined: report.s_combined,
            abs_error: report.abs_error,
            rounds_executed: report.rounds_executed,
        };
        Ok(())
    })
}

use std::ffi::CStr;
use std::ptr;

use opinion_influence_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(oi_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn generated(n: usize, seed: u64) -> *mut OiMatrix {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { oi_matrix_generate(n, 0.3, 0.1, seed, &mut m) },
        OiStatus::OiOk
    );
    assert!(!m.is_null());
    m
}

#[test]
fn matrix_round_trip() {
    let entries = [0.5, 0.5, 0.2, 0.8];
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            oi_matrix_new(entries.as_ptr(), 2, 1e-12, &mut m),
            OiStatus::OiOk
        );
        assert_eq!(oi_matrix_dim(m), 2);
        let mut copy = [0.0; 4];
        assert_eq!(
            oi_matrix_copy_entries(m, copy.as_mut_ptr(), 4),
            OiStatus::OiOk
        );
        assert_eq!(copy, entries);
        assert_eq!(
            oi_matrix_copy_entries(m, copy.as_mut_ptr(), 3),
            OiStatus::OiInvalidArgument
        );
        oi_matrix_free(m);
    }
}

#[test]
fn rejects_bad_rows() {
    let entries = [0.5, 0.4, 0.2, 0.8];
    let mut m = ptr::null_mut();
    let status = unsafe { oi_matrix_new(entries.as_ptr(), 2, 1e-12, &mut m) };
    assert_eq!(status, OiStatus::OiNotStochastic);
    assert!(m.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_arguments() {
    unsafe {
        assert_eq!(
            oi_matrix_new(ptr::null(), 2, 1e-12, ptr::null_mut()),
            OiStatus::OiNullPointer
        );
        let mut m = ptr::null_mut();
        assert_eq!(
            oi_matrix_new(ptr::null(), 2, 1e-12, &mut m),
            OiStatus::OiNullPointer
        );
        assert_eq!(oi_matrix_dim(ptr::null()), 0);
        let mut out = false;
        assert_eq!(
            oi_is_strongly_connected(ptr::null(), &mut out),
            OiStatus::OiNullPointer
        );
        oi_matrix_free(ptr::null_mut());
    }
}

#[test]
fn graph_checks_on_generated() {
    let m = generated(12, 4);
    let (mut sc, mut ap) = (false, false);
    unsafe {
        assert_eq!(oi_is_strongly_connected(m, &mut sc), OiStatus::OiOk);
        assert_eq!(oi_is_aperiodic(m, &mut ap), OiStatus::OiOk);
        oi_matrix_free(m);
    }
    assert!(sc && ap);
}

#[test]
fn influence_vector_is_stationary() {
    let entries = [0.9, 0.1, 0.3, 0.7];
    let mut m = ptr::null_mut();
    let mut s = [0.0; 2];
    unsafe {
        oi_matrix_new(entries.as_ptr(), 2, 1e-12, &mut m);
        assert_eq!(
            oi_social_influence_vector(m, 1e-14, 1_000_000, s.as_mut_ptr(), 2),
            OiStatus::OiOk
        );
        oi_matrix_free(m);
    }
    assert!((s[0] - 0.75).abs() < 1e-12 && (s[1] - 0.25).abs() < 1e-12);
}

#[test]
fn closed_form_and_domain() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(
            oi_closed_form_influence(3, 0.5, 0.2, &mut v),
            OiStatus::OiOk
        );
        assert!((v - 0.271).abs() < 1e-12);
        assert_eq!(
            oi_closed_form_influence(3, 1.5, 0.2, &mut v),
            OiStatus::OiInvalidArgument
        );
    }
}

#[test]
fn intervened_step_in_place() {
    let entries = [0.5, 0.5, 0.2, 0.8];
    let mut m = ptr::null_mut();
    let mut p = [0.0, 1.0];
    let targets = [0usize];
    unsafe {
        oi_matrix_new(entries.as_ptr(), 2, 1e-12, &mut m);
        let status = oi_step_intervened(m, targets.as_ptr(), 1, 0.2, p.as_ptr(), p.as_mut_ptr(), 2);
        assert_eq!(status, OiStatus::OiOk);
        let bad = [5usize];
        let status = oi_step_intervened(m, bad.as_ptr(), 1, 0.2, p.as_ptr(), p.as_mut_ptr(), 2);
        assert_eq!(status, OiStatus::OiInvalidArgument);
        oi_matrix_free(m);
    }
    assert!((p[0] - 0.6).abs() < 1e-15);
    assert!((p[1] - 0.8).abs() < 1e-15);
}

#[test]
fn simulate_matches_closed_form() {
    let m = generated(10, 9);
    let targets = [1usize, 4, 7];
    let mut report = OiReport::default();
    unsafe {
        let status = oi_simulate(
            m,
            targets.as_ptr(),
            3,
            0.3,
            4,
            OI_TIMING_CONSENSUS,
            3000,
            0,
            &mut report,
        );
        assert_eq!(status, OiStatus::OiOk, "{}", last_error());
        assert_eq!(
            oi_simulate(m, targets.as_ptr(), 3, 0.3, 4, 9, 3000, 0, &mut report),
            OiStatus::OiInvalidArgument
        );
        oi_matrix_free(m);
    }
    assert!(report.abs_error <= 1e-6, "{report:?}");
}

#[test]
fn header_declares_api() {
    let header = include_str!("../include/opinion_influence.h");
    for name in [
        "typedef struct OiMatrix OiMatrix",
        "OI_OK = 0",
        "OI_NOT_STOCHASTIC",
        "OI_TIMING_UNIFORM",
        "oi_matrix_new",
        "oi_matrix_generate",
        "oi_matrix_free",
        "oi_social_influence_vector",
        "oi_step_intervened",
        "oi_simulate",
        "oi_last_error",
        "OiReport",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

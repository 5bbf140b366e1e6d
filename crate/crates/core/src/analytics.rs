//! Social influence vector, the closed-form influence of the external agent
//! under consensus timing, and the comparisons built on it.

use std::fmt::Write as _;

use thiserror::Error;

use crate::dynamics::{self, DynamicsError, Scenario, SimulationTrace, TargetSet, Timing};
use crate::linalg::{dot, InteractionMatrix, LinalgError, OpinionVector};

pub const DEFAULT_INFLUENCE_TOL: f64 = 1e-12;
pub const DEFAULT_INFLUENCE_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error(
        "power iteration did not settle after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("trace did not reach consensus (final gap {0:e})")]
    NotConverged(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

fn domain(msg: String) -> AnalyticsError {
    AnalyticsError::Domain(msg)
}

/// Normalized left eigenvector `s` of `T` for eigenvalue 1; `s_i` is agent
/// `i`'s weight in the limiting consensus.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialInfluenceVector {
    weights: Vec<f64>,
    /// `||s T - s||_inf` at the returned `s`.
    pub residual: f64,
    pub iterations: usize,
}

impl SocialInfluenceVector {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Combined influence of `targets`: the sum of their weights.
    pub fn combined(&self, targets: &TargetSet) -> f64 {
        targets.indices().iter().map(|&i| self.weights[i]).sum()
    }

    /// The `m` most influential agents, ties broken by lower index.
    pub fn top(&self, m: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.weights.len()).collect();
        order.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        order.truncate(m);
        order
    }
}

fn left_mul(s: &[f64], t: &InteractionMatrix, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (si, row) in s.iter().zip(t.rows()) {
        for (o, &w) in out.iter_mut().zip(row) {
            *o += si * w;
        }
    }
}

/// Power iteration on the transpose, `s <- s T / sum(s T)`, from the uniform
/// vector until `||s T - s||_inf <= tol`.
pub fn social_influence_vector(
    t: &InteractionMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<SocialInfluenceVector, AnalyticsError> {
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    let n = t.n();
    let mut s = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iterations in 0..=max_iter {
        left_mul(&s, t, &mut next);
        residual = s
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if residual <= tol {
            return Ok(SocialInfluenceVector {
                weights: s,
                residual,
                iterations,
            });
        }
        let total: f64 = next.iter().sum();
        for (a, b) in s.iter_mut().zip(&next) {
            *a = b / total;
        }
    }
    Err(AnalyticsError::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

pub fn default_social_influence(
    t: &InteractionMatrix,
) -> Result<SocialInfluenceVector, AnalyticsError> {
    social_influence_vector(t, DEFAULT_INFLUENCE_TOL, DEFAULT_INFLUENCE_MAX_ITER)
}

fn check_unit_open(name: &str, x: f64) -> Result<(), AnalyticsError> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in (0, 1), got {x}")))
    }
}

fn check_share(s: f64) -> Result<(), AnalyticsError> {
    if s > 0.0 && s <= 1.0 {
        Ok(())
    } else {
        Err(domain(format!(
            "combined influence must lie in (0, 1], got {s}"
        )))
    }
}

fn pow(base: f64, k: u64) -> f64 {
    match i32::try_from(k) {
        Ok(e) => base.powi(e),
        Err(_) => base.powf(k as f64),
    }
}

/// `I(k, lambda, s) = 1 - (1 - s lambda)^k`: the limiting opinion after `k`
/// interventions under consensus timing.
pub fn closed_form_influence(k: u64, lambda: f64, s_combined: f64) -> Result<f64, AnalyticsError> {
    check_unit_open("lambda", lambda)?;
    check_share(s_combined)?;
    Ok(1.0 - pow(1.0 - s_combined * lambda, k))
}

/// `I(k + 1) - I(k) = (1 - s lambda)^k s lambda`.
pub fn marginal_round_gain(k: u64, lambda: f64, s_combined: f64) -> Result<f64, AnalyticsError> {
    check_unit_open("lambda", lambda)?;
    check_share(s_combined)?;
    let step = s_combined * lambda;
    Ok(pow(1.0 - step, k) * step)
}

/// Scaling intensity by `r` versus scaling coverage by `r`:
/// returns `(I(k, r lambda, s), I(k, lambda, r s))`, equal in exact arithmetic.
pub fn lemma1_check(k: u64, lambda: f64, s: f64, r: f64) -> Result<(f64, f64), AnalyticsError> {
    check_unit_open("lambda", lambda)?;
    check_unit_open("s", s)?;
    if !(r >= 1.0 && r * lambda < 1.0 && r * s < 1.0) {
        return Err(domain(format!(
            "need r >= 1, r*lambda < 1 and r*s < 1 (r={r}, lambda={lambda}, s={s})"
        )));
    }
    Ok((
        closed_form_influence(k, r * lambda, s)?,
        closed_form_influence(k, lambda, r * s)?,
    ))
}

/// Scaling coverage by integer `r` versus scaling duration by `r`:
/// returns `(I(k, lambda, r s), I(r k, lambda, s))`; the first is strictly
/// larger. Only `r s < 1` is required; `r lambda` never enters either side.
pub fn lemma2_check(k: u64, lambda: f64, s: f64, r: u64) -> Result<(f64, f64), AnalyticsError> {
    check_unit_open("lambda", lambda)?;
    check_unit_open("s", s)?;
    if k == 0 {
        return Err(domain("k must be at least 1".into()));
    }
    let rf = r as f64;
    if !(r >= 2 && rf * s < 1.0) {
        return Err(domain(format!(
            "need integer r >= 2 and r*s < 1 (r={r}, s={s})"
        )));
    }
    let rk = r
        .checked_mul(k)
        .ok_or_else(|| domain(format!("r*k overflows (r={r}, k={k})")))?;
    Ok((
        closed_form_influence(k, lambda, rf * s)?,
        closed_form_influence(rk, lambda, s)?,
    ))
}

/// Limiting opinions when the external agent participates in rounds 1 and
/// `r` only: `2 S Lambda - lambda S (T^(r-1))_m Lambda`, with `S` the
/// consensus projection whose rows all equal `s`.
pub fn start_two_round_limit(
    t: &InteractionMatrix,
    targets: &TargetSet,
    lambda: f64,
    r: u64,
) -> Result<OpinionVector, AnalyticsError> {
    check_unit_open("lambda", lambda)?;
    if r < 2 {
        return Err(domain(format!("second round must be >= 2, got {r}")));
    }
    // validates targets against n
    dynamics::extend_matrix(t, targets, lambda)?;
    let s = default_social_influence(t)?;
    let n = t.n();

    let injection: Vec<f64> = (0..n)
        .map(|i| if targets.contains(i) { lambda } else { 0.0 })
        .collect();
    // T^(r-1) Lambda, restricted to target rows
    let mut carried = injection.clone();
    let mut scratch = vec![0.0; n];
    for _ in 0..r - 1 {
        for (o, row) in scratch.iter_mut().zip(t.rows()) {
            *o = dot(row, &carried);
        }
        std::mem::swap(&mut carried, &mut scratch);
    }
    let combined: Vec<f64> = (0..n)
        .map(|i| {
            let lost = if targets.contains(i) {
                lambda * carried[i]
            } else {
                0.0
            };
            2.0 * injection[i] - lost
        })
        .collect();
    let value = dot(s.weights(), &combined);
    Ok(OpinionVector::new(vec![value; n]))
}

/// Limiting opinion read off a converged trace that started from all-zero
/// opinions with the external agent at 1: the external agent's influence.
pub fn measured_influence(trace: &SimulationTrace) -> Result<f64, AnalyticsError> {
    if !trace.converged {
        return Err(AnalyticsError::NotConverged(trace.final_gap));
    }
    Ok(trace.final_opinions().mean())
}

/// Measured influence next to the consensus-timing prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceReport {
    pub timing: Timing,
    pub k: u64,
    pub lambda: f64,
    pub m: usize,
    pub s_combined: f64,
    pub measured: f64,
    /// `I(k, lambda, s_combined)`; 0 when `k = 0` or nobody is targeted.
    pub predicted: f64,
    pub abs_error: f64,
    pub rounds_executed: u64,
}

impl InfluenceReport {
    pub fn new(
        timing: Timing,
        k: u64,
        lambda: f64,
        m: usize,
        s_combined: f64,
        measured: f64,
        rounds_executed: u64,
    ) -> Result<Self, AnalyticsError> {
        let predicted = if k == 0 || m == 0 {
            0.0
        } else {
            closed_form_influence(k, lambda, s_combined.min(1.0))?
        };
        Ok(InfluenceReport {
            timing,
            k,
            lambda,
            m,
            s_combined,
            measured,
            predicted,
            abs_error: (measured - predicted).abs(),
            rounds_executed,
        })
    }

    pub const CSV_HEADER: [&'static str; 9] = [
        "timing",
        "k",
        "lambda",
        "m",
        "s_combined",
        "measured",
        "predicted",
        "abs_error",
        "rounds_executed",
    ];

    pub fn csv_record(&self) -> [String; 9] {
        [
            self.timing.to_string(),
            self.k.to_string(),
            format!("{:?}", self.lambda),
            self.m.to_string(),
            format!("{:?}", self.s_combined),
            format!("{:?}", self.measured),
            format!("{:?}", self.predicted),
            format!("{:?}", self.abs_error),
            self.rounds_executed.to_string(),
        ]
    }

    /// `key = value` lines, one per field, in CSV column order.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (key, value) in Self::CSV_HEADER.iter().zip(self.csv_record()) {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

/// Simulates `scenario` and reports its measured influence against the
/// closed form. Returns the trace alongside.
pub fn influence_report(
    scenario: &Scenario,
) -> Result<(InfluenceReport, SimulationTrace), AnalyticsError> {
    let s = default_social_influence(&scenario.matrix)?;
    let trace = dynamics::simulate(scenario)?;
    let measured = measured_influence(&trace)?;
    let report = InfluenceReport::new(
        scenario.timing,
        scenario.k as u64,
        scenario.lambda,
        scenario.targets.len(),
        s.combined(&scenario.targets),
        measured,
        trace.rounds_executed,
    )?;
    Ok((report, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, simulate_with_schedule, InterventionSchedule};
    use crate::linalg::validate_stochastic;
    use crate::netgen::{generate_interaction_matrix, NetworkSpec};

    fn m(rows: &[&[f64]]) -> InteractionMatrix {
        validate_stochastic(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), 1e-12).unwrap()
    }

    #[test]
    fn influence_vector_uniform_for_doubly_stochastic() {
        let s = default_social_influence(&m(&[&[0.5, 0.5], &[0.5, 0.5]])).unwrap();
        assert_eq!(s.weights(), &[0.5, 0.5]);
        let t = m(&[&[0.2, 0.3, 0.5], &[0.5, 0.2, 0.3], &[0.3, 0.5, 0.2]]);
        let s = default_social_influence(&t).unwrap();
        assert!(s.weights().iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn influence_vector_two_by_two() {
        // s T = s with s = (a, b): a = b/2, a + b = 1  =>  (1/3, 2/3)
        let s = default_social_influence(&m(&[&[0.0, 1.0], &[0.5, 0.5]])).unwrap();
        assert!((s.weights()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.weights()[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn influence_vector_reports_non_convergence() {
        let t = m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.5, 0.5, 0.0]]);
        let err = social_influence_vector(&t, 1e-15, 3).unwrap_err();
        assert!(matches!(
            err,
            AnalyticsError::NoConvergence { iterations: 3, .. }
        ));
    }

    #[test]
    fn top_and_combined() {
        let s = default_social_influence(&m(&[&[0.0, 1.0], &[0.5, 0.5]])).unwrap();
        assert_eq!(s.top(1), vec![1]);
        assert_eq!(s.top(5), vec![1, 0]);
        let all = TargetSet::all(2);
        assert!((s.combined(&all) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_examples() {
        assert!((closed_form_influence(1, 0.5, 0.2).unwrap() - 0.1).abs() < 1e-15);
        assert!((closed_form_influence(2, 0.5, 0.2).unwrap() - 0.19).abs() < 1e-15);
        assert_eq!(closed_form_influence(0, 0.3, 0.7).unwrap(), 0.0);
        assert!(closed_form_influence(1, 0.0, 0.2).is_err());
        assert!(closed_form_influence(1, 0.5, 0.0).is_err());
        assert!(closed_form_influence(1, 0.5, 1.2).is_err());
        assert!(closed_form_influence(1, 0.5, 1.0).is_ok());
    }

    #[test]
    fn closed_form_matches_geometric_sum() {
        for k in 0..30u64 {
            for &(lambda, s) in &[(0.1, 0.3), (0.5, 0.2), (0.9, 1.0), (0.05, 0.05)] {
                let q: f64 = 1.0 - s * lambda;
                let sum: f64 = (0..k).map(|j| q.powi(j as i32) * s * lambda).sum();
                assert!((closed_form_influence(k, lambda, s).unwrap() - sum).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn marginal_gain_examples() {
        assert!((marginal_round_gain(0, 0.5, 0.2).unwrap() - 0.1).abs() < 1e-15);
        assert!((marginal_round_gain(1, 0.5, 0.2).unwrap() - 0.09).abs() < 1e-15);
        for k in 0..20 {
            assert!(
                marginal_round_gain(k + 1, 0.5, 0.2).unwrap()
                    < marginal_round_gain(k, 0.5, 0.2).unwrap()
            );
        }
    }

    #[test]
    fn lemma1_examples() {
        // 1 - (1 - 0.3 * 0.3)^3 = 1 - 0.91^3 = 0.246429
        let (lhs, rhs) = lemma1_check(3, 0.2, 0.3, 1.5).unwrap();
        assert!((lhs - 0.246429).abs() < 1e-12);
        assert!((lhs - rhs).abs() < 1e-12);
        let (lhs, rhs) = lemma1_check(7, 0.4, 0.6, 1.0).unwrap();
        assert_eq!(lhs, rhs);
        assert!(lemma1_check(3, 0.6, 0.3, 2.0).is_err());
        assert!(lemma1_check(3, 0.2, 0.3, 0.5).is_err());
    }

    #[test]
    fn lemma2_examples() {
        let (cov, dur) = lemma2_check(1, 0.5, 0.2, 2).unwrap();
        assert!((cov - 0.2).abs() < 1e-15);
        assert!((dur - 0.19).abs() < 1e-15);
        assert!(cov > dur);
        // 1 - 0.97^2 = 0.0591; 1 - 0.99^6 = 0.058519850599
        let (cov, dur) = lemma2_check(2, 0.1, 0.1, 3).unwrap();
        assert!((cov - 0.0591).abs() < 1e-15);
        assert!((dur - 0.058519850599).abs() < 1e-14);
        assert!(cov > dur);
        assert!(lemma2_check(2, 0.1, 0.1, 1).is_err());
        assert!(lemma2_check(0, 0.1, 0.1, 2).is_err());
        assert!(lemma2_check(2, 0.1, 0.6, 2).is_err());
        assert!(lemma2_check(2, 0.6, 0.1, 2).is_ok());
    }

    #[test]
    fn two_round_limit_full_coverage() {
        let t = generate_interaction_matrix(&NetworkSpec::new(6, 0.4, 0.1, 9)).unwrap();
        for r in [2, 3, 10] {
            let p = start_two_round_limit(&t, &TargetSet::all(6), 0.3, r).unwrap();
            let expected = 2.0 * 0.3 - 0.3 * 0.3;
            assert!(p.as_slice().iter().all(|x| (x - expected).abs() < 1e-10));
        }
    }

    #[test]
    fn two_round_limit_no_targets() {
        let t = generate_interaction_matrix(&NetworkSpec::new(4, 0.4, 0.1, 2)).unwrap();
        let p = start_two_round_limit(&t, &TargetSet::empty(), 0.3, 4).unwrap();
        assert!(p.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn two_round_limit_matches_simulation() {
        let t = generate_interaction_matrix(&NetworkSpec::new(5, 0.3, 0.1, 21)).unwrap();
        let targets = TargetSet::new(vec![1, 3], 5).unwrap();
        for r in [2, 3, 7, 40] {
            let predicted = start_two_round_limit(&t, &targets, 0.4, r).unwrap();
            let scenario = Scenario::new(t.clone(), targets.clone(), 0.4, 2, Timing::Start);
            let schedule = InterventionSchedule::explicit(vec![1, r]).unwrap();
            let trace = simulate_with_schedule(&scenario, &schedule).unwrap();
            let measured = measured_influence(&trace).unwrap();
            assert!((predicted[0] - measured).abs() < 1e-6, "r={r}");
        }
    }

    #[test]
    fn measured_influence_reads_consensus() {
        let t = m(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let s = Scenario::new(
            t.clone(),
            TargetSet::new(vec![0], 2).unwrap(),
            0.5,
            1,
            Timing::Consensus,
        );
        assert!((measured_influence(&simulate(&s).unwrap()).unwrap() - 0.25).abs() < 1e-15);
        let zero = Scenario { k: 0, ..s.clone() };
        assert_eq!(measured_influence(&simulate(&zero).unwrap()).unwrap(), 0.0);
        let stuck = Scenario::new(
            m(&[&[0.999, 0.001], &[0.001, 0.999]]),
            TargetSet::new(vec![0], 2).unwrap(),
            0.5,
            1,
            Timing::Start,
        )
        .with_horizon(5);
        assert!(matches!(
            measured_influence(&simulate(&stuck).unwrap()),
            Err(AnalyticsError::NotConverged(_))
        ));
    }

    #[test]
    fn report_formats() {
        let r = InfluenceReport::new(Timing::Consensus, 2, 0.5, 1, 0.2, 0.19, 40).unwrap();
        assert!((r.predicted - 0.19).abs() < 1e-15);
        assert!(r.abs_error < 1e-15);
        let kv = r.to_key_value();
        assert!(kv.starts_with("timing = consensus\nk = 2\nlambda = 0.5\n"));
        assert_eq!(r.csv_record().len(), InfluenceReport::CSV_HEADER.len());
        let none = InfluenceReport::new(Timing::Start, 3, 0.5, 0, 0.0, 0.0, 3).unwrap();
        assert_eq!(none.predicted, 0.0);
    }
}

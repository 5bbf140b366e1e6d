//! Self-checks behind the `verify` subcommand: the analytic results
//! re-derived numerically on random instances.

use std::fmt;

use crate::analytics::{
    closed_form_influence, default_social_influence, lemma1_check, lemma2_check,
    marginal_round_gain, measured_influence,
};
use crate::dynamics::{
    extend_matrix, simulate, simulate_with_schedule, step_intervened, InterventionSchedule,
    Scenario, TargetSet, Timing,
};
use crate::linalg::OpinionVector;
use crate::netgen::{generate_interaction_matrix, NetworkSpec};
use crate::rng::{derive_seed, DetRng};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    /// Largest deviation seen (or smallest margin for strict inequalities).
    pub worst: f64,
    pub tolerance: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:<28} cases={:<5} worst={:.3e} tol={:.0e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.worst,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random networks for the closed-form check.
    pub networks: usize,
    pub n: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 2024,
            networks: 20,
            n: 10,
        }
    }
}

fn random_targets(rng: &mut DetRng, n: usize) -> TargetSet {
    let m = 1 + rng.below(n as u64) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order.truncate(m);
    TargetSet::new(order, n).expect("indices drawn in range")
}

/// Consensus-timing measured influence against `1 - (1 - s lambda)^k`.
pub fn check_closed_form(opts: &VerifyOptions) -> Result<CheckOutcome, HarnessError> {
    let tol = 1e-6;
    let mut rng = DetRng::new(derive_seed(opts.seed, &[1]));
    let (mut worst, mut cases) = (0.0f64, 0);
    for net in 0..opts.networks {
        let spec = NetworkSpec {
            n: opts.n,
            seed: derive_seed(opts.seed, &[100, net as u64]),
            ..NetworkSpec::default()
        };
        let t = generate_interaction_matrix(&spec)?;
        let s = default_social_influence(&t)?;
        for k in 1..=5 {
            for lambda in [0.1, 0.3, 0.5] {
                let targets = random_targets(&mut rng, opts.n);
                let predicted =
                    closed_form_influence(k as u64, lambda, s.combined(&targets).min(1.0))?;
                let trace = simulate(&Scenario::new(
                    t.clone(),
                    targets,
                    lambda,
                    k,
                    Timing::Consensus,
                ))?;
                let measured = measured_influence(&trace)?;
                worst = worst.max((measured - predicted).abs());
                cases += 1;
            }
        }
    }
    Ok(CheckOutcome {
        name: "closed-form influence",
        passed: worst <= tol,
        cases,
        worst,
        tolerance: tol,
    })
}

/// Intervened round against the extended-matrix product.
pub fn check_extended_product(opts: &VerifyOptions) -> Result<CheckOutcome, HarnessError> {
    let tol = 1e-15;
    let mut rng = DetRng::new(derive_seed(opts.seed, &[2]));
    let mut worst = 0.0f64;
    let draws = 1000;
    for d in 0..draws {
        let n = 2 + rng.below(14) as usize;
        let t = generate_interaction_matrix(&NetworkSpec {
            n,
            edge_density: rng.uniform(0.05, 1.0),
            self_loop_min: 0.1,
            seed: derive_seed(opts.seed, &[200, d]),
        })?;
        let targets = random_targets(&mut rng, n);
        let lambda = rng.uniform(0.01, 0.99);
        let p = OpinionVector::new((0..n).map(|_| rng.next_f64()).collect());
        let a = extend_matrix(&t, &targets, lambda)?;
        let via_a = a.apply(&p, 1.0)?;
        let direct = step_intervened(&t, &targets, lambda, &p)?;
        for (x, y) in via_a.as_slice().iter().zip(direct.as_slice()) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(CheckOutcome {
        name: "extended-matrix round",
        passed: worst <= tol,
        cases: draws as usize,
        worst,
        tolerance: tol,
    })
}

/// Equal gain from scaling intensity or coverage.
pub fn check_lemma1(opts: &VerifyOptions) -> Result<CheckOutcome, HarnessError> {
    let tol = 1e-12;
    let mut rng = DetRng::new(derive_seed(opts.seed, &[3]));
    let mut worst = 0.0f64;
    let draws = 1000;
    for _ in 0..draws {
        let lambda = rng.uniform(0.01, 0.99);
        let s = rng.uniform(0.01, 0.99);
        let cap = (1.0 / lambda).min(1.0 / s);
        let r = 1.0 + rng.next_f64() * (cap - 1.0) * 0.999;
        let k = 1 + rng.below(50);
        let (lhs, rhs) = lemma1_check(k, lambda, s, r)?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(CheckOutcome {
        name: "intensity/coverage parity",
        passed: worst <= tol,
        cases: draws,
        worst,
        tolerance: tol,
    })
}

/// Scaling coverage beats scaling duration, on a grid.
pub fn check_lemma2() -> Result<CheckOutcome, HarnessError> {
    let grid: Vec<f64> = (1..20).map(|i| f64::from(i) * 0.05).collect();
    let mut margin = f64::INFINITY;
    let mut cases = 0;
    for r in 2..=4u64 {
        for k in 1..=10 {
            for &lambda in &grid {
                for &s in &grid {
                    if r as f64 * lambda >= 1.0 || r as f64 * s >= 1.0 {
                        continue;
                    }
                    let (cov, dur) = lemma2_check(k, lambda, s, r)?;
                    margin = margin.min(cov - dur);
                    cases += 1;
                }
            }
        }
    }
    Ok(CheckOutcome {
        name: "coverage beats duration",
        passed: margin > 0.0,
        cases,
        worst: margin,
        tolerance: 0.0,
    })
}

/// Marginal gain strictly decreasing in `k`.
pub fn check_diminishing_returns(opts: &VerifyOptions) -> Result<CheckOutcome, HarnessError> {
    let mut rng = DetRng::new(derive_seed(opts.seed, &[4]));
    let mut worst = f64::INFINITY;
    let pairs = 100;
    for _ in 0..pairs {
        let lambda = rng.uniform(0.01, 0.99);
        let s = rng.uniform(0.01, 1.0);
        for k in 0..20 {
            let drop = marginal_round_gain(k, lambda, s)? - marginal_round_gain(k + 1, lambda, s)?;
            worst = worst.min(drop);
        }
    }
    Ok(CheckOutcome {
        name: "diminishing returns",
        passed: worst > 0.0,
        cases: pairs,
        worst,
        tolerance: 0.0,
    })
}

/// At full coverage every schedule with the same `k` yields the same limit.
pub fn check_full_coverage_timing(opts: &VerifyOptions) -> Result<CheckOutcome, HarnessError> {
    let (tol, n, k, lambda, horizon) = (1e-8, opts.n, 5usize, 0.3, 200u64);
    let t = generate_interaction_matrix(&NetworkSpec {
        n,
        seed: derive_seed(opts.seed, &[5]),
        ..NetworkSpec::default()
    })?;
    let scenario =
        Scenario::new(t, TargetSet::all(n), lambda, k, Timing::Consensus).with_horizon(horizon);
    let mut limits = vec![measured_influence(&simulate(&scenario)?)?];
    let mut rng = DetRng::new(derive_seed(opts.seed, &[6]));
    for _ in 0..20 {
        let rounds = rng.sample_distinct(1, horizon / 2, k);
        let schedule = InterventionSchedule::explicit(rounds)?;
        limits.push(measured_influence(&simulate_with_schedule(
            &scenario, &schedule,
        )?)?);
    }
    let lo = limits.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = limits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let closed = closed_form_influence(k as u64, lambda, 1.0)?;
    Ok(CheckOutcome {
        name: "full-coverage timing",
        passed: hi - lo <= tol && (limits[0] - closed).abs() <= 1e-6,
        cases: limits.len(),
        worst: hi - lo,
        tolerance: tol,
    })
}

pub fn run_all(opts: &VerifyOptions) -> Result<Vec<CheckOutcome>, HarnessError> {
    Ok(vec![
        check_closed_form(opts)?,
        check_extended_product(opts)?,
        check_lemma1(opts)?,
        check_lemma2()?,
        check_diminishing_returns(opts)?,
        check_full_coverage_timing(opts)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let opts = VerifyOptions {
            networks: 3,
            ..VerifyOptions::default()
        };
        for outcome in run_all(&opts).unwrap() {
            assert!(outcome.passed, "{outcome}");
        }
    }
}

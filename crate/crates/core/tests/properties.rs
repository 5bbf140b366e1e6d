use opinion_influence::analytics::{
    closed_form_influence, default_social_influence, marginal_round_gain, measured_influence,
    start_two_round_limit,
};
use opinion_influence::dynamics::{
    extend_matrix, simulate, simulate_with_schedule, step_intervened, InterventionSchedule,
    Scenario, TargetSet, Timing,
};
use opinion_influence::linalg::{consensus_gap, mat_vec, InteractionMatrix, OpinionVector};
use opinion_influence::netgen::{
    generate_interaction_matrix, is_aperiodic, is_strongly_connected, NetworkSpec,
};
use opinion_influence::validate_stochastic;
use proptest::prelude::*;

fn network(n: usize, density: f64, seed: u64) -> InteractionMatrix {
    generate_interaction_matrix(&NetworkSpec::new(n, density, 0.1, seed)).unwrap()
}

/// (n, density, seed, target mask, lambda, opinions)
fn instance() -> impl Strategy<Value = (InteractionMatrix, TargetSet, f64, OpinionVector)> {
    (2usize..12, 0.05f64..1.0, any::<u64>()).prop_flat_map(|(n, density, seed)| {
        (
            Just(network(n, density, seed)),
            proptest::collection::vec(any::<bool>(), n),
            0.01f64..0.99,
            proptest::collection::vec(0.0f64..=1.0, n),
        )
            .prop_map(move |(t, mask, lambda, p)| {
                let idx: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
                (
                    t,
                    TargetSet::new(idx, n).unwrap(),
                    lambda,
                    OpinionVector::new(p),
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn averaging_stays_in_hull((t, _, _, p) in instance()) {
        let q = mat_vec(&t, &p).unwrap();
        prop_assert!(q.min() >= p.min() - 1e-15 && q.max() <= p.max() + 1e-15);
        prop_assert!(consensus_gap(&q).unwrap() <= consensus_gap(&p).unwrap() + 1e-15);
    }

    #[test]
    fn intervened_round_equals_extended_product((t, targets, lambda, p) in instance()) {
        let a = extend_matrix(&t, &targets, lambda).unwrap();
        let via_a = a.apply(&p, 1.0).unwrap();
        let direct = step_intervened(&t, &targets, lambda, &p).unwrap();
        prop_assert_eq!(via_a.as_slice(), direct.as_slice());
    }

    #[test]
    fn extended_matrix_is_row_stochastic((t, targets, lambda, _) in instance()) {
        let a = extend_matrix(&t, &targets, lambda).unwrap();
        let rows: Vec<Vec<f64>> = (0..a.dim()).map(|i| a.row(i).to_vec()).collect();
        prop_assert!(validate_stochastic(&rows, 1e-12).is_ok());
        prop_assert_eq!(a.get(t.n(), t.n()), 1.0);
    }

    #[test]
    fn intervened_round_stays_in_unit_interval((t, targets, lambda, p) in instance()) {
        let q = step_intervened(&t, &targets, lambda, &p).unwrap();
        prop_assert!(q.min() >= 0.0 && q.max() <= 1.0);
    }

    #[test]
    fn generated_networks_meet_assumptions(n in 2usize..40, density in 0.01f64..1.0, seed in any::<u64>()) {
        let t = network(n, density, seed);
        prop_assert!(validate_stochastic(&t.to_rows(), 1e-12).is_ok());
        prop_assert!(is_strongly_connected(&t));
        prop_assert!(is_aperiodic(&t).unwrap());
        prop_assert!((0..n).all(|i| t.get(i, i) >= 0.1));
        prop_assert_eq!(t, network(n, density, seed));
    }

    #[test]
    fn influence_vector_is_a_distribution(n in 2usize..30, seed in any::<u64>()) {
        let t = network(n, 0.3, seed);
        let s = default_social_influence(&t).unwrap();
        prop_assert!(s.weights().iter().all(|&w| w > 0.0));
        prop_assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(s.residual <= 1e-12);
    }

    #[test]
    fn closed_form_is_monotone(k in 0u64..200, lambda in 0.001f64..0.999, s in 0.001f64..1.0) {
        let here = closed_form_influence(k, lambda, s).unwrap();
        let next = closed_form_influence(k + 1, lambda, s).unwrap();
        let gain = marginal_round_gain(k, lambda, s).unwrap();
        prop_assert!((0.0..=1.0).contains(&here));
        prop_assert!(next >= here);
        // strict only while the step is resolvable next to 1.0
        if gain > 4.0 * f64::EPSILON {
            prop_assert!(next > here);
        }
        prop_assert!(((next - here) - gain).abs() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulation_is_deterministic_and_bounded(
        n in 2usize..10,
        seed in any::<u64>(),
        k in 0usize..6,
        lambda in 0.05f64..0.95,
        timing in prop_oneof![Just(Timing::Consensus), Just(Timing::Start), Just(Timing::Uniform)],
    ) {
        let t = network(n, 0.4, seed);
        let targets = TargetSet::new((0..n).step_by(2).collect(), n).unwrap();
        let scenario = Scenario::new(t, targets, lambda, k, timing).with_seed(seed);
        let first = simulate(&scenario).unwrap();
        prop_assert_eq!(&first, &simulate(&scenario).unwrap());
        prop_assert!(first.converged);
        for snap in &first.snapshots {
            prop_assert!(snap.opinions.min() >= 0.0 && snap.opinions.max() <= 1.0);
        }
        prop_assert_eq!(first.intervention_rounds.len(), k);
    }

    #[test]
    fn consensus_timing_matches_closed_form(n in 2usize..10, seed in any::<u64>(), k in 1u64..6, lambda in 0.05f64..0.95) {
        let t = network(n, 0.3, seed);
        let targets = TargetSet::new(vec![0, n - 1], n).unwrap();
        let s = default_social_influence(&t).unwrap().combined(&targets);
        let trace = simulate(&Scenario::new(t, targets, lambda, k as usize, Timing::Consensus)).unwrap();
        let measured = measured_influence(&trace).unwrap();
        prop_assert!((measured - closed_form_influence(k, lambda, s.min(1.0)).unwrap()).abs() <= 1e-6);
    }

    #[test]
    fn two_round_limit_matches_simulation(n in 2usize..10, seed in any::<u64>(), r in 2u64..12, lambda in 0.05f64..0.95) {
        let t = network(n, 0.3, seed);
        let targets = TargetSet::new(vec![0], n).unwrap();
        let scenario = Scenario::new(t.clone(), targets.clone(), lambda, 2, Timing::Start);
        let schedule = InterventionSchedule::explicit(vec![1, r]).unwrap();
        let trace = simulate_with_schedule(&scenario, &schedule).unwrap();
        let limit = start_two_round_limit(&t, &targets, lambda, r).unwrap();
        for (x, y) in trace.final_opinions().as_slice().iter().zip(limit.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-6, "{} vs {}", x, y);
        }
    }

    #[test]
    fn top_influence_targets_dominate(n in 3usize..12, seed in any::<u64>(), m in 1usize..3, k in 1u64..8, lambda in 0.05f64..0.95) {
        let t = network(n, 0.3, seed);
        let s = default_social_influence(&t).unwrap();
        let top = TargetSet::new(s.top(m), n).unwrap();
        let rest = TargetSet::new((0..n).filter(|i| !top.contains(*i)).take(m).collect(), n).unwrap();
        let best = closed_form_influence(k, lambda, s.combined(&top).min(1.0)).unwrap();
        let other = closed_form_influence(k, lambda, s.combined(&rest).min(1.0)).unwrap();
        prop_assert!(best >= other);
    }
}

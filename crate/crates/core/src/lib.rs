//! DeGroot opinion formation with a temporary stubborn external agent.
//!
//! * [`linalg`]: row-stochastic matrices, opinion vectors, the extended matrix.
//! * [`netgen`]: random strongly connected, aperiodic networks.
//! * [`dynamics`]: plain and intervened rounds, timing schedules, simulation.
//! * [`analytics`]: social influence vector and closed-form influence.
//! * [`harness`]: seeded parameter sweeps and report output.
//!
//! Agents are indexed from 0 throughout; rounds are indexed from 1.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod dynamics;
pub mod harness;
pub mod linalg;
pub mod netgen;
pub mod rng;

pub use analytics::{
    closed_form_influence, lemma1_check, lemma2_check, marginal_round_gain, measured_influence,
    social_influence_vector, start_two_round_limit, InfluenceReport, SocialInfluenceVector,
};
pub use dynamics::{
    build_schedule, extend_matrix, run_to_consensus, simulate, simulate_with_schedule,
    step_full_coverage, step_intervened, step_plain, InterventionSchedule, Scenario,
    SimulationTrace, TargetSet, Timing,
};
pub use linalg::{
    consensus_gap, mat_vec, validate_stochastic, ExtendedMatrix, InteractionMatrix, OpinionVector,
};
pub use netgen::{generate_interaction_matrix, is_aperiodic, is_strongly_connected, NetworkSpec};

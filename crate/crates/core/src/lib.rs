//! Planning under general, time-indexed discounting.
//!
//! An agent of age `k` weighs the reward at time `t` by `d^k_t`. When the
//! columns of the discount matrix are not proportional, plans made now are
//! abandoned later. This crate computes optimal policies per column, the
//! mixed policy that actually gets played, its regret, and sub-game perfect
//! equilibria of the game between the agent's successive selves.

pub mod builtin;
pub mod discount;
pub mod env;
pub mod equilibrium;
pub mod error;
pub mod io;
pub mod matrix;
pub mod oracle;
pub mod planning;
pub mod policy;
pub mod regret;
pub mod scalar;
pub mod zoo;

pub use discount::{distance, make_discount, DiscountVector, Family, Support, Tail};
pub use env::{
    expected_rewards, path_probability, validate_environment, Diagnostic, EnvBuilder, Environment, HistoryNode,
    Lattice, RewardReach, RewardSequence, Rule, StateId, TailKind,
};
pub use equilibrium::{
    check_non_expectimax, enumerate_spe, policy_distance, spe_backward_induction, spe_convergence, spe_window,
    verify_spe, SpeResult, TieRule, VerifyReport,
};
pub use error::{Error, Result};
pub use io::{environment_to_json, load_discount, load_environment};
pub use matrix::{
    infer_geometric_rate, is_sliding, is_time_consistent, make_consistent_matrix, ColumnRule, ConsistencyReport,
    DiscountMatrix,
};
pub use num_traits::{One, Zero};
pub use oracle::{brute_force_optimal, brute_force_spe_set, enumerate_policies, PolicyEnumeration};
pub use planning::{mixed_policy_rollout, optimal_policy, plan_horizon, value, Rollout, ValueReport};
pub use policy::{Decision, Policy, TailRule};
pub use regret::{
    build_lower_bound_instance, continuity_bound, regret, regret_with_bound, tightness_experiment, BoundTerms,
    RegretReport, TightnessReport,
};
pub use scalar::{Rational, Scalar};

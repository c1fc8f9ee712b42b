//! Regret of time-inconsistency and its continuity bound.

use crate::builtin::lower_bound_chain;
use crate::discount::{distance, Support};
use crate::env::{Environment, HistoryNode, Lattice};
use crate::error::{Error, Result};
use crate::matrix::{ColumnRule, DiscountMatrix};
use crate::planning::{last_reward_time, mixed_policy_rollout, optimal_with_values, value};
use crate::policy::Decision;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct BoundTerms<S> {
    pub epsilon: S,
    /// First time the expected optimal remaining value drops to `epsilon`.
    pub cut: usize,
    /// `D(δ^1, δ^cut)`
    pub first_to_cut: S,
    /// `D(δ^k, δ^{k+1})` for `k = 1..cut`.
    pub adjacent: Vec<S>,
    /// The environment's reward bound; distances count at this weight.
    pub reward_scale: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegretReport<S> {
    /// `V*_{δ^1}` at the root.
    pub v_star: S,
    /// Value of the mixed policy under `δ^1`.
    pub v_mixed: S,
    pub regret: S,
    /// Truncation error bound of each of the two values.
    pub truncation_slack: S,
    pub bound: Option<S>,
    pub bound_terms: Option<BoundTerms<S>>,
}

/// `V*_{δ^1} - V^{π_d}_{δ^1}` at the root.
pub fn regret<S: Scalar>(env: &Environment<S>, m: &DiscountMatrix<S>, tol: &S) -> Result<RegretReport<S>> {
    let root = HistoryNode::root(env);
    let first = m.column(1)?;
    let (_, _, star) = optimal_with_values(env, &first, &root, tol)?;
    let horizon = star.horizon_used.max(1);
    let rollout = mixed_policy_rollout(env, m, &root, horizon, tol)?;
    let mixed = value(env, &rollout.policy, &root, &first, tol)?;
    Ok(RegretReport {
        regret: star.value.clone() - mixed.value.clone(),
        v_star: star.value,
        v_mixed: mixed.value,
        truncation_slack: star.truncation_error_bound,
        bound: None,
        bound_terms: None,
    })
}

/// [`regret`] together with [`continuity_bound`].
pub fn regret_with_bound<S: Scalar>(
    env: &Environment<S>,
    m: &DiscountMatrix<S>,
    epsilon: &S,
    tol: &S,
) -> Result<RegretReport<S>> {
    let mut report = regret(env, m, tol)?;
    let (bound, terms) = continuity_bound(env, m, epsilon, tol)?;
    report.bound = Some(bound);
    report.bound_terms = Some(terms);
    Ok(report)
}

/// `ε + R (D(δ^1, δ^t) + Σ_{k<t} D(δ^k, δ^{k+1}))` at the cut time `t`,
/// where `R` is the reward bound (1 for rewards in `[0, 1]`).
///
/// With `ε = 0` the cut is certified structurally: no reward that `δ^1`
/// weighs positively is reachable any more from the nodes on the optimal
/// path. With `ε > 0` it is found from the computed optimal values.
pub fn continuity_bound<S: Scalar>(
    env: &Environment<S>,
    m: &DiscountMatrix<S>,
    epsilon: &S,
    tol: &S,
) -> Result<(S, BoundTerms<S>)> {
    if *epsilon < S::zero() {
        return Err(Error::InvalidParameter(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let root = HistoryNode::root(env);
    let first = m.column(1)?;
    let (policy, values, report) = optimal_with_values(env, &first, &root, tol)?;
    let horizon = report.horizon_used;
    let n = env.num_states();

    let structural_last = if epsilon.is_zero() {
        let env_last = last_reward_time(env, 1, &[env.start()]);
        let support_end = match first.support() {
            Support::Empty => Some(0),
            Support::EndsAt(t) => Some(t),
            Support::Unbounded => None,
        };
        Some(match (support_end, env_last) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => return Err(Error::CutNotFound(horizon + 1)),
        })
    } else {
        None
    };

    // distribution over states at each time when following π*_{δ^1}
    let steps = horizon.max(structural_last.unwrap_or(0));
    let mut start_mass = vec![S::zero(); n];
    start_mass[env.start()] = S::one();
    let mut masses = vec![start_mass];
    for t in 1..=steps {
        let current = &masses[t - 1];
        let mut next = vec![S::zero(); n];
        for s in 0..n {
            if current[s].is_zero() {
                continue;
            }
            if let Decision::Act(a) = policy.decide(t, s) {
                for tr in env.successors(s, a) {
                    next[tr.target] = next[tr.target].clone() + current[s].clone() * tr.prob.clone();
                }
            }
        }
        masses.push(next);
    }

    let cut = match structural_last {
        Some(last) => {
            let gain = can_gain(env, &first, last);
            (1..=last + 1)
                .find(|&t| (0..n).all(|s| masses[t - 1][s].is_zero() || !gain(t, s)))
                .ok_or(Error::CutNotFound(last + 1))?
        }
        None => (1..=horizon + 1)
            .find(|&t| {
                let expected = (0..n).fold(S::zero(), |acc, s| acc + masses[t - 1][s].clone() * values.get(t, s));
                expected <= *epsilon
            })
            .ok_or(Error::CutNotFound(horizon + 1))?,
    };

    let cut_column = m.column(cut)?;
    let first_to_cut = distance(&first, &cut_column)?;
    let mut adjacent = Vec::with_capacity(cut.saturating_sub(1));
    let mut previous = first.clone();
    for k in 1..cut {
        let next = m.column(k + 1)?;
        adjacent.push(distance(&previous, &next)?);
        previous = next;
    }
    let reward_scale = env.reward_bound().clone();
    let distances = adjacent.iter().fold(first_to_cut.clone(), |acc, d| acc + d.clone());
    let bound = epsilon.clone() + reward_scale.clone() * distances;
    Ok((bound, BoundTerms { epsilon: epsilon.clone(), cut, first_to_cut, adjacent, reward_scale }))
}

/// Whether some policy still collects a reward that `v` weighs positively
/// from `(t, s)`; false after `last`.
fn can_gain<'a, S: Scalar>(
    env: &'a Environment<S>,
    v: &crate::discount::DiscountVector<S>,
    last: usize,
) -> impl Fn(usize, usize) -> bool + 'a {
    let n = env.num_states();
    let lattice = Lattice::build_from(env, 1, &(0..n).collect::<Vec<_>>(), last);
    let mut table = vec![vec![false; n]; last + 2];
    for t in (1..=last).rev() {
        let weighted = v.entry(t).is_positive();
        for &s in lattice.states_at(t) {
            table[t][s] = (0..env.num_actions(s)).any(|a| {
                (weighted && env.reward(s, a).is_positive())
                    || env.successors(s, a).iter().any(|tr| tr.prob.is_positive() && table[t + 1][tr.target])
            });
        }
    }
    move |t, s| t <= last && table[t][s]
}

/// The chain and matrix on which regret nearly reaches the continuity bound:
/// `d^k_i = δ` for `k < i <= t`, zero otherwise.
pub fn build_lower_bound_instance<S: Scalar>(
    delta: &S,
    t: usize,
    epsilon: &S,
) -> Result<(Environment<S>, DiscountMatrix<S>)> {
    if !delta.is_positive() {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let env = lower_bound_chain(epsilon, t)?;
    let columns: Vec<Vec<S>> =
        (1..=t + 1).map(|k| (1..=t).map(|i| if k < i { delta.clone() } else { S::zero() }).collect()).collect();
    let m = DiscountMatrix::from_rows(&columns, ColumnRule::RepeatLast)?;
    Ok((env, m))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TightnessReport<S> {
    pub regret: RegretReport<S>,
    /// `(t-1)δ(1-ε) - (1-ε^(t-1))δ`
    pub closed_form: S,
    /// `(t-2)(1-ε)δ`, claimed to be a strict lower bound.
    pub stated_lower: S,
    pub lower_holds: bool,
    /// `(t+1)δ`
    pub upper: S,
    pub upper_holds: bool,
    /// Continuity bound with `ε = 0`.
    pub bound: S,
    pub bound_terms: BoundTerms<S>,
}

/// Exact regret on the chain instance next to the closed forms and bound.
pub fn tightness_experiment<S: Scalar>(delta: &S, t: usize, epsilon: &S, tol: &S) -> Result<TightnessReport<S>> {
    let (env, m) = build_lower_bound_instance(delta, t, epsilon)?;
    let report = regret(&env, &m, tol)?;
    let (bound, bound_terms) = continuity_bound(&env, &m, &S::zero(), tol)?;
    let one = S::one();
    let tn = S::from_usize(t);
    let closed_form = (tn.clone() - one.clone()) * delta.clone() * (one.clone() - epsilon.clone())
        - (one.clone() - epsilon.powu(t as u64 - 1)) * delta.clone();
    let stated_lower = (tn.clone() - S::from_usize(2)) * (one.clone() - epsilon.clone()) * delta.clone();
    let upper = (tn + one) * delta.clone();
    Ok(TightnessReport {
        lower_holds: stated_lower < report.regret,
        upper_holds: report.regret < upper,
        regret: report,
        closed_form,
        stated_lower,
        upper,
        bound,
        bound_terms,
    })
}

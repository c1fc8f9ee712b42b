//! Brute-force ground truth for small instances.
//!
//! Everything here enumerates: policies over every lattice node, histories
//! along every path, deviations over every assignment at one time-step. It
//! is slow on purpose and shares no evaluation code with the planners.

use std::collections::BTreeSet;

use crate::discount::DiscountVector;
use crate::env::{ActionIdx, Environment, HistoryNode, Lattice, StateId};
use crate::equilibrium::spe_window;
use crate::error::{Error, Result};
use crate::matrix::DiscountMatrix;
use crate::policy::{Decision, Policy, TailRule};
use crate::scalar::Scalar;

/// Every deterministic policy over the lattice nodes up to a horizon.
#[derive(Clone, Debug)]
pub struct PolicyEnumeration {
    nodes: Vec<(usize, StateId)>,
    radices: Vec<usize>,
    digits: Vec<usize>,
    horizon: usize,
    total: u128,
    done: bool,
}

impl PolicyEnumeration {
    /// Number of policies, `Π |A(s)|` over the nodes.
    pub fn size(&self) -> u128 {
        self.total
    }

    pub fn nodes(&self) -> &[(usize, StateId)] {
        &self.nodes
    }
}

impl Iterator for PolicyEnumeration {
    type Item = Policy;

    fn next(&mut self) -> Option<Policy> {
        if self.done {
            return None;
        }
        let mut policy = Policy::new(1, self.horizon, TailRule::Death);
        for (&(t, s), &a) in self.nodes.iter().zip(&self.digits) {
            policy.set(t, s, a);
        }
        self.done = true;
        for (d, &r) in self.digits.iter_mut().zip(&self.radices) {
            *d += 1;
            if *d < r {
                self.done = false;
                break;
            }
            *d = 0;
        }
        Some(policy)
    }
}

pub fn enumerate_policies<S: Scalar>(env: &Environment<S>, horizon: usize, budget: u128) -> Result<PolicyEnumeration> {
    let lattice = Lattice::build(env, 1, env.start(), horizon);
    let nodes: Vec<(usize, StateId)> = lattice.nodes().collect();
    let radices: Vec<usize> = nodes.iter().map(|&(_, s)| env.num_actions(s)).collect();
    let total = radices.iter().fold(1u128, |acc, &r| acc.saturating_mul(r as u128));
    if total > budget {
        return Err(Error::BudgetExceeded { needed: total, budget });
    }
    let digits = vec![0; nodes.len()];
    Ok(PolicyEnumeration { nodes, radices, digits, horizon, total, done: false })
}

/// Discounted value from `(time, state)` summed over every history up to
/// `horizon`, weighting the reward at `u` by `weight(u)`.
pub fn history_value<S: Scalar>(
    env: &Environment<S>,
    policy: &Policy,
    time: usize,
    state: StateId,
    horizon: usize,
    weight: &dyn Fn(usize) -> S,
) -> Result<S> {
    if time > horizon {
        return Ok(S::zero());
    }
    let a = match policy.decide(time, state) {
        Decision::Act(a) => a,
        Decision::Death => return Ok(S::zero()),
        Decision::Undefined => return Err(Error::UndefinedPolicy { time, state: env.state_name(state).to_string() }),
    };
    let mut total = weight(time) * env.reward(state, a).clone();
    for tr in env.successors(state, a) {
        if tr.prob.is_zero() {
            continue;
        }
        total = total + tr.prob.clone() * history_value(env, policy, time + 1, tr.target, horizon, weight)?;
    }
    Ok(total)
}

/// `R^π(start)_k` by summing over every history.
pub fn history_rewards<S: Scalar>(
    env: &Environment<S>,
    policy: &Policy,
    start: &HistoryNode<S>,
    horizon: usize,
) -> Result<Vec<S>> {
    (1..=horizon)
        .map(|k| {
            if k < start.time {
                Ok(S::zero())
            } else {
                history_value(env, policy, start.time, start.state, horizon, &|u| {
                    if u == k {
                        S::one()
                    } else {
                        S::zero()
                    }
                })
            }
        })
        .collect()
}

/// Exhaustive maximum of `V^π_δ` over policies up to `horizon`; the first
/// maximiser in enumeration order is returned.
pub fn brute_force_optimal<S: Scalar>(
    env: &Environment<S>,
    v: &DiscountVector<S>,
    horizon: usize,
    budget: u128,
) -> Result<(Policy, S)> {
    let weight = |t: usize| v.entry(t);
    let mut best: Option<(Policy, S)> = None;
    for policy in enumerate_policies(env, horizon, budget)? {
        let x = history_value(env, &policy, 1, env.start(), horizon, &weight)?;
        if best.as_ref().is_none_or(|(_, b)| x > *b) {
            best = Some((policy, x));
        }
    }
    Ok(best.expect("at least one policy"))
}

/// Every policy that no single player can improve on by changing the
/// actions at their own time-step, checked literally.
///
/// Players past `horizon` inside [`spe_window`] are unconstrained; results
/// are projected onto players `1..=horizon`.
pub fn brute_force_spe_set<S: Scalar>(
    env: &Environment<S>,
    m: &DiscountMatrix<S>,
    horizon: usize,
    budget: u128,
) -> Result<BTreeSet<Policy>> {
    let end = horizon + spe_window(env, m, horizon)?;
    let columns = (1..=horizon).map(|k| m.column(k)).collect::<Result<Vec<_>>>()?;
    let lattice = Lattice::build(env, 1, env.start(), end);
    let layers: Vec<Vec<StateId>> = (1..=horizon).map(|t| lattice.states_at(t).to_vec()).collect();
    let mut found = BTreeSet::new();
    'policies: for policy in enumerate_policies(env, end, budget)? {
        for t in 1..=horizon {
            let column = &columns[t - 1];
            let weight = |u: usize| column.entry(u);
            let layer = &layers[t - 1];
            let current: Vec<S> =
                layer.iter().map(|&s| history_value(env, &policy, t, s, end, &weight)).collect::<Result<_>>()?;
            for deviation in assignments(env, layer) {
                let mut other = policy.clone();
                for (&s, &a) in layer.iter().zip(&deviation) {
                    other.set(t, s, a);
                }
                for (i, &s) in layer.iter().enumerate() {
                    if history_value(env, &other, t, s, end, &weight)? > current[i] {
                        continue 'policies;
                    }
                }
            }
        }
        found.insert(policy.truncated(horizon));
    }
    Ok(found)
}

fn assignments<S: Scalar>(env: &Environment<S>, layer: &[StateId]) -> Vec<Vec<ActionIdx>> {
    let mut out = vec![Vec::new()];
    for &s in layer {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..env.num_actions(s)).map(move |a| {
                    let mut p = prefix.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::three_step_game;
    use crate::env::EnvBuilder;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn enumeration_counts() {
        let env = three_step_game::<Rational>();
        assert_eq!(enumerate_policies(&env, 3, 1000).unwrap().size(), 4);
        assert_eq!(enumerate_policies(&env, 3, 1000).unwrap().count(), 4);

        let mut b = EnvBuilder::<f64>::new();
        b.start("a").edge("a", "x", 0.0, "b").edge("a", "y", 0.0, "b");
        b.edge("b", "x", 0.0, "c").edge("b", "y", 0.0, "c");
        b.edge("c", "x", 0.0, "c").edge("c", "y", 0.0, "c");
        let env = b.build().unwrap();
        let all: BTreeSet<Policy> = enumerate_policies(&env, 3, 1000).unwrap().collect();
        assert_eq!(all.len(), 8);
        assert!(enumerate_policies(&env, 3, 7).is_err());
    }

    #[test]
    fn three_step_maximum() {
        let env = three_step_game::<Rational>();
        let v = DiscountVector::from_full(1, &[q(2, 1), q(1, 1), q(2, 1)]);
        let (_, best) = brute_force_optimal(&env, &v, 3, 1000).unwrap();
        assert_eq!(best, q(9, 1));
    }

    #[test]
    fn history_rewards_on_a_coin_flip() {
        let mut b = EnvBuilder::<Rational>::new();
        b.start("a").action("a", "flip", q(0, 1), &[("h", q(1, 2)), ("t", q(1, 2))]);
        b.edge("h", "x", q(1, 1), "z").edge("t", "x", q(0, 1), "z").edge("z", "x", q(0, 1), "z");
        let env = b.build().unwrap();
        let policy = enumerate_policies(&env, 3, 10).unwrap().next().unwrap();
        let r = history_rewards(&env, &policy, &HistoryNode::root(&env), 3).unwrap();
        assert_eq!(r, vec![q(0, 1), q(1, 2), q(0, 1)]);
    }
}

//! Values, optimal policies by exact expectimax, and mixed-policy rollouts.

use crate::discount::{DiscountVector, Support};
use crate::env::{expected_rewards, Environment, HistoryNode, Lattice, RewardSequence, StateId, Step};
use crate::error::{Error, Result};
use crate::matrix::DiscountMatrix;
use crate::policy::{Decision, Policy, TailRule};
use crate::scalar::Scalar;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ValueReport<S> {
    pub value: S,
    /// Upper bound on the reward mass dropped by truncating at `horizon_used`.
    pub truncation_error_bound: S,
    pub horizon_used: usize,
}

/// Values per `(time, state)` node; unreachable nodes hold zero.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeValues<S> {
    start_time: usize,
    rows: Vec<Vec<S>>,
}

impl<S: Scalar> NodeValues<S> {
    fn zeros(start_time: usize, horizon: usize, states: usize) -> Self {
        let layers = (horizon + 1).saturating_sub(start_time);
        NodeValues { start_time, rows: vec![vec![S::zero(); states]; layers] }
    }

    /// Zero past the covered horizon.
    pub fn get(&self, time: usize, state: StateId) -> S {
        if time < self.start_time {
            return S::zero();
        }
        self.rows.get(time - self.start_time).map_or_else(S::zero, |r| r[state].clone())
    }

    fn set(&mut self, time: usize, state: StateId, x: S) {
        self.rows[time - self.start_time][state] = x;
    }
}

/// Last time from `(time, state)` at which a reward can be nonzero.
pub fn last_reward_time<S: Scalar>(env: &Environment<S>, time: usize, states: &[StateId]) -> Option<usize> {
    let mut last = time - 1;
    for &s in states {
        last = last.max(env.reward_reach(time, s).last_time(time)?);
    }
    Some(last)
}

/// Horizon after which dropped rewards weigh at most `tol`.
///
/// Vectors with finite support end exactly where the support ends. A known
/// last rewarding time `env_last` caps the answer.
pub fn plan_horizon<S: Scalar>(v: &DiscountVector<S>, tol: &S, env_last: Option<usize>) -> Result<usize> {
    let own = match v.support() {
        Support::Empty => Some(v.age() - 1),
        Support::EndsAt(t) => Some(t),
        Support::Unbounded if v.is_summable() && tol.is_positive() => {
            if let Some(last) = env_last {
                if v.tail_mass(last).is_some_and(|m| m > *tol) {
                    return Ok(last);
                }
            }
            Some(least_horizon(v, tol)?)
        }
        Support::Unbounded => None,
    };
    match (own, env_last) {
        (Some(a), Some(b)) => Ok(a.min(b)),
        (Some(a), None) => Ok(a),
        (None, Some(b)) => Ok(b),
        (None, None) => {
            if v.is_summable() {
                Err(Error::InvalidParameter("tolerance must be positive for vectors with infinite support".into()))
            } else {
                Err(Error::NonSummable { age: v.age() })
            }
        }
    }
}

fn least_horizon<S: Scalar>(v: &DiscountVector<S>, tol: &S) -> Result<usize> {
    let ok = |t: usize| v.tail_mass(t).is_some_and(|m| m <= *tol);
    let mut lo = v.age() - 1;
    if ok(lo) {
        return Ok(lo);
    }
    let mut step = 1usize;
    let mut hi = lo + step;
    while !ok(hi) {
        lo = hi;
        step *= 2;
        if step > 1 << 30 {
            return Err(Error::InvalidParameter("tail mass never drops below the tolerance".into()));
        }
        hi = lo + step;
    }
    // invariant: !ok(lo), ok(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn truncation_bound<S: Scalar>(
    env: &Environment<S>,
    v: &DiscountVector<S>,
    horizon: usize,
    env_last: Option<usize>,
) -> S {
    if env_last.is_some_and(|last| last <= horizon) {
        return S::zero();
    }
    match v.tail_mass(horizon) {
        Some(m) => env.reward_bound().clone() * m,
        None => S::zero(),
    }
}

/// Horizon, truncation bound and last rewarding time for planning from `start`.
pub fn planning_window<S: Scalar>(
    env: &Environment<S>,
    start: &HistoryNode<S>,
    v: &DiscountVector<S>,
    tol: &S,
) -> Result<(usize, S)> {
    let env_last = last_reward_time(env, start.time, &[start.state]);
    let horizon = plan_horizon(v, tol, env_last)?;
    Ok((horizon, truncation_bound(env, v, horizon, env_last)))
}

/// `V^π_δ(start)`, truncated at the planning horizon.
pub fn value<S: Scalar>(
    env: &Environment<S>,
    policy: &Policy,
    start: &HistoryNode<S>,
    v: &DiscountVector<S>,
    tol: &S,
) -> Result<ValueReport<S>> {
    let (horizon, bound) = planning_window(env, start, v, tol)?;
    let value = if horizon < start.time {
        S::zero()
    } else {
        discounted_sum(&expected_rewards(env, policy, start, horizon)?, v, start.time, horizon)
    };
    Ok(ValueReport { value, truncation_error_bound: bound, horizon_used: horizon })
}

/// `Σ_{t=from}^{to} r_t d_t`.
pub fn discounted_sum<S: Scalar>(rewards: &RewardSequence<S>, v: &DiscountVector<S>, from: usize, to: usize) -> S {
    (from..=to).fold(S::zero(), |acc, t| acc + rewards.at(t) * v.entry(t))
}

/// Backward induction over the lattice: values count rewards from each
/// node's own time up to the lattice horizon. Lowest index wins ties.
pub(crate) fn solve_lattice<S: Scalar>(
    env: &Environment<S>,
    lattice: &Lattice,
    weight: impl Fn(usize) -> S,
) -> (Policy, NodeValues<S>) {
    let (t0, horizon) = (lattice.start_time(), lattice.horizon());
    let mut values = NodeValues::zeros(t0, horizon, env.num_states());
    let mut policy = Policy::new(t0, horizon, TailRule::FirstAction);
    for t in (t0..=horizon).rev() {
        let w = weight(t);
        for &s in lattice.states_at(t) {
            let mut best: Option<(usize, S)> = None;
            for a in 0..env.num_actions(s) {
                let q = action_value(env, &values, t, s, a, &w);
                if best.as_ref().is_none_or(|(_, b)| q > *b) {
                    best = Some((a, q));
                }
            }
            let (a, q) = best.expect("every state has an action");
            policy.set(t, s, a);
            values.set(t, s, q);
        }
    }
    (policy, values)
}

/// `w r(s,a) + Σ p V(t+1, s')` with `values` holding the continuation.
pub(crate) fn action_value<S: Scalar>(
    env: &Environment<S>,
    values: &NodeValues<S>,
    t: usize,
    s: StateId,
    a: usize,
    w: &S,
) -> S {
    env.successors(s, a)
        .iter()
        .fold(w.clone() * env.reward(s, a).clone(), |acc, tr| acc + tr.prob.clone() * values.get(t + 1, tr.target))
}

/// Values of a fixed policy at every lattice node from time `from` on;
/// rewards after the lattice horizon are dropped.
pub(crate) fn evaluate_lattice<S: Scalar>(
    env: &Environment<S>,
    lattice: &Lattice,
    policy: &Policy,
    from: usize,
    weight: impl Fn(usize) -> S,
) -> Result<NodeValues<S>> {
    let (t0, horizon) = (lattice.start_time(), lattice.horizon());
    let mut values = NodeValues::zeros(t0, horizon, env.num_states());
    for t in (from.max(t0)..=horizon).rev() {
        let w = weight(t);
        for &s in lattice.states_at(t) {
            let q = match policy.decide(t, s) {
                Decision::Act(a) => action_value(env, &values, t, s, a, &w),
                Decision::Death => S::zero(),
                Decision::Undefined => {
                    return Err(Error::UndefinedPolicy { time: t, state: env.state_name(s).to_string() })
                }
            };
            values.set(t, s, q);
        }
    }
    Ok(values)
}

/// `π*_δ` from `start` with its value.
pub fn optimal_policy<S: Scalar>(
    env: &Environment<S>,
    v: &DiscountVector<S>,
    start: &HistoryNode<S>,
    tol: &S,
) -> Result<(Policy, ValueReport<S>)> {
    let (policy, _, report) = optimal_with_values(env, v, start, tol)?;
    Ok((policy, report))
}

/// [`optimal_policy`] plus the optimal value at every lattice node.
pub fn optimal_with_values<S: Scalar>(
    env: &Environment<S>,
    v: &DiscountVector<S>,
    start: &HistoryNode<S>,
    tol: &S,
) -> Result<(Policy, NodeValues<S>, ValueReport<S>)> {
    let (horizon, bound) = planning_window(env, start, v, tol)?;
    let lattice = Lattice::build(env, start.time, start.state, horizon.max(start.time));
    let (policy, values) = solve_lattice(env, &lattice, |t| if t <= horizon { v.entry(t) } else { S::zero() });
    let report = ValueReport {
        value: values.get(start.time, start.state),
        truncation_error_bound: bound,
        horizon_used: horizon,
    };
    Ok((policy, values, report))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout<S> {
    /// Each node decided by the optimal policy of its own time's column.
    pub policy: Policy,
    pub rewards: RewardSequence<S>,
    /// The realised steps, for deterministic environments.
    pub trace: Option<Vec<Step<S>>>,
}

/// The mixed policy `π_d` from `start` up to `horizon`.
pub fn mixed_policy_rollout<S: Scalar>(
    env: &Environment<S>,
    m: &DiscountMatrix<S>,
    start: &HistoryNode<S>,
    horizon: usize,
    tol: &S,
) -> Result<Rollout<S>> {
    if horizon < start.time {
        return Err(Error::HorizonBeforeStart { horizon, start: start.time });
    }
    let lattice = Lattice::build(env, start.time, start.state, horizon);
    let mut policy = Policy::new(start.time, horizon, TailRule::FirstAction);
    for t in start.time..=horizon {
        let column = m.column(t)?;
        let states = lattice.states_at(t);
        let env_last = last_reward_time(env, t, states);
        let plan_end = plan_horizon(&column, tol, env_last)?.max(t);
        let local = Lattice::build_from(env, t, states, plan_end);
        let (local_policy, _) = solve_lattice(env, &local, |u| column.entry(u));
        for &s in states {
            policy.set(t, s, local_policy.action(t, s).expect("decided"));
        }
    }
    let rewards = expected_rewards(env, &policy, start, horizon)?;
    let trace = if env.is_deterministic() { Some(realised_trace(env, &policy, start, horizon)?) } else { None };
    Ok(Rollout { policy, rewards, trace })
}

/// Follows a policy through a deterministic environment.
pub fn realised_trace<S: Scalar>(
    env: &Environment<S>,
    policy: &Policy,
    start: &HistoryNode<S>,
    horizon: usize,
) -> Result<Vec<Step<S>>> {
    let mut node = start.clone();
    while node.time <= horizon {
        let a = match policy.decide(node.time, node.state) {
            Decision::Act(a) => a,
            Decision::Death => break,
            Decision::Undefined => {
                return Err(Error::UndefinedPolicy { time: node.time, state: env.state_name(node.state).to_string() })
            }
        };
        let next = env
            .successors(node.state, a)
            .iter()
            .find(|tr| tr.prob.is_positive())
            .map(|tr| tr.target)
            .expect("validated environment");
        node = node.advance(env, a, next)?;
    }
    Ok(node.trace)
}

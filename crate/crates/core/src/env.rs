//! Finite stochastic environments, histories and expected reward sequences.
//!
//! An environment is a directed graph: each state offers an ordered list of
//! actions, each action pays a deterministic reward and moves to a successor
//! drawn from a finite distribution. Observations are identified with the
//! successor state.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{Decision, Policy};
use crate::scalar::Scalar;

pub type StateId = usize;
pub type ActionIdx = usize;

/// Successor probabilities must sum to one within this tolerance.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition<S> {
    pub target: StateId,
    pub prob: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Action<S> {
    pub id: String,
    pub reward: S,
    pub successors: Vec<Transition<S>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct State<S> {
    pub id: String,
    pub actions: Vec<Action<S>>,
}

/// Declared behaviour once the explicit graph runs out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailKind {
    /// Rewards are eventually zero on every path.
    #[default]
    Zero,
    /// Some loop may keep paying rewards forever.
    Loop,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Environment<S> {
    states: Vec<State<S>>,
    start: StateId,
    tail: TailKind,
    reward_bound: S,
}

/// Latest time at which a nonzero reward can still be collected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardReach {
    Never,
    LastAt(usize),
    Unbounded,
}

impl RewardReach {
    /// Last rewarding time, if bounded. `Never` reports `start - 1`.
    pub fn last_time(self, start_time: usize) -> Option<usize> {
        match self {
            RewardReach::Never => Some(start_time - 1),
            RewardReach::LastAt(t) => Some(t),
            RewardReach::Unbounded => None,
        }
    }
}

impl<S: Scalar> Environment<S> {
    /// Assembles an environment without checking it; see [`validate_environment`].
    pub fn from_parts(states: Vec<State<S>>, start: StateId, tail: TailKind, reward_bound: S) -> Self {
        Environment { states, start, tail, reward_bound }
    }

    pub fn states(&self) -> &[State<S>] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn tail(&self) -> TailKind {
        self.tail
    }

    pub fn reward_bound(&self) -> &S {
        &self.reward_bound
    }

    pub fn actions(&self, s: StateId) -> &[Action<S>] {
        &self.states[s].actions
    }

    pub fn num_actions(&self, s: StateId) -> usize {
        self.states[s].actions.len()
    }

    pub fn reward(&self, s: StateId, a: ActionIdx) -> &S {
        &self.states[s].actions[a].reward
    }

    pub fn successors(&self, s: StateId, a: ActionIdx) -> &[Transition<S>] {
        &self.states[s].actions[a].successors
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s].id
    }

    pub fn action_name(&self, s: StateId, a: ActionIdx) -> &str {
        &self.states[s].actions[a].id
    }

    pub fn state_index(&self, id: &str) -> Option<StateId> {
        self.states.iter().position(|s| s.id == id)
    }

    pub fn action_index(&self, s: StateId, id: &str) -> Option<ActionIdx> {
        self.states[s].actions.iter().position(|a| a.id == id)
    }

    /// Every action leads to a single successor with probability one.
    pub fn is_deterministic(&self) -> bool {
        self.states
            .iter()
            .flat_map(|s| &s.actions)
            .all(|a| a.successors.iter().filter(|t| t.prob.is_positive()).count() == 1)
    }

    /// Successor states reachable with positive probability.
    fn live_successors(&self, s: StateId) -> impl Iterator<Item = StateId> + '_ {
        self.states[s]
            .actions
            .iter()
            .flat_map(|a| a.successors.iter())
            .filter(|t| t.prob.is_positive())
            .map(|t| t.target)
    }

    /// When, starting in `state` at `time`, a nonzero reward can last be collected.
    pub fn reward_reach(&self, time: usize, state: StateId) -> RewardReach {
        let n = self.states.len();
        let mut reachable = vec![false; n];
        let mut stack = vec![state];
        reachable[state] = true;
        while let Some(s) = stack.pop() {
            for t in self.live_successors(s) {
                if !reachable[t] {
                    reachable[t] = true;
                    stack.push(t);
                }
            }
        }
        let pays = |s: StateId| self.states[s].actions.iter().any(|a| a.reward.is_positive());
        // states that can still lead to a reward
        let mut gaining: Vec<bool> = (0..n).map(|s| reachable[s] && pays(s)).collect();
        loop {
            let mut changed = false;
            for s in 0..n {
                if reachable[s] && !gaining[s] && self.live_successors(s).any(|t| gaining[t]) {
                    gaining[s] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if !gaining[state] {
            return RewardReach::Never;
        }
        // longest path through gaining states; a cycle among them is unbounded
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let mut mark = vec![Mark::New; n];
        let mut longest = vec![0usize; n];
        fn visit<S: Scalar>(
            env: &Environment<S>,
            s: StateId,
            gaining: &[bool],
            mark: &mut [Mark],
            longest: &mut [usize],
        ) -> bool {
            mark[s] = Mark::Active;
            let mut best: Option<usize> =
                if env.states[s].actions.iter().any(|a| a.reward.is_positive()) { Some(0) } else { None };
            let succ: Vec<StateId> = env.live_successors(s).filter(|&t| gaining[t]).collect();
            for t in succ {
                match mark[t] {
                    Mark::Active => return false,
                    Mark::New => {
                        if !visit(env, t, gaining, mark, longest) {
                            return false;
                        }
                    }
                    Mark::Done => {}
                }
                best = Some(best.map_or(longest[t] + 1, |b| b.max(longest[t] + 1)));
            }
            longest[s] = best.unwrap_or(0);
            mark[s] = Mark::Done;
            true
        }
        if visit(self, state, &gaining, &mut mark, &mut longest) {
            RewardReach::LastAt(time + longest[state])
        } else {
            RewardReach::Unbounded
        }
    }
}

/// Rule broken by an environment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    NoActions,
    RewardRange,
    NegativeProbability,
    ProbabilitySum,
    NoSuccessors,
    BadReference,
    DuplicateState,
    DuplicateAction,
    TailMismatch,
    BadStart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub state: Option<String>,
    pub action: Option<String>,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.state, &self.action) {
            (Some(s), Some(a)) => write!(f, "state '{s}' action '{a}': {}", self.detail),
            (Some(s), None) => write!(f, "state '{s}': {}", self.detail),
            _ => write!(f, "{}", self.detail),
        }
    }
}

/// Checks every environment invariant; an empty list means valid.
pub fn validate_environment<S: Scalar>(env: &Environment<S>) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let n = env.states.len();
    let zero = S::zero();
    let diag = |state: Option<&str>, action: Option<&str>, rule, detail: String| Diagnostic {
        state: state.map(str::to_string),
        action: action.map(str::to_string),
        rule,
        detail,
    };
    if env.start >= n {
        out.push(diag(None, None, Rule::BadStart, format!("start state index {} out of range", env.start)));
    }
    let mut seen = HashMap::new();
    for state in &env.states {
        if seen.insert(state.id.as_str(), ()).is_some() {
            out.push(diag(Some(&state.id), None, Rule::DuplicateState, "state id appears more than once".into()));
        }
    }
    for state in &env.states {
        let sid = Some(state.id.as_str());
        if state.actions.is_empty() {
            out.push(diag(sid, None, Rule::NoActions, "state has no actions".into()));
        }
        let mut action_ids = HashMap::new();
        for action in &state.actions {
            let aid = Some(action.id.as_str());
            if action_ids.insert(action.id.as_str(), ()).is_some() {
                out.push(diag(sid, aid, Rule::DuplicateAction, "action id appears more than once".into()));
            }
            if action.reward < zero || action.reward > env.reward_bound || !action.reward.to_f64().is_finite() {
                out.push(diag(
                    sid,
                    aid,
                    Rule::RewardRange,
                    format!("reward {} outside [0, {}]", action.reward, env.reward_bound),
                ));
            }
            if action.successors.is_empty() {
                out.push(diag(sid, aid, Rule::NoSuccessors, "action has no successors".into()));
                continue;
            }
            let mut total = S::zero();
            for tr in &action.successors {
                if tr.target >= n {
                    out.push(diag(sid, aid, Rule::BadReference, format!("successor index {} out of range", tr.target)));
                }
                if tr.prob < zero {
                    out.push(diag(sid, aid, Rule::NegativeProbability, format!("negative probability {}", tr.prob)));
                }
                total = total + tr.prob.clone();
            }
            let gap = (total.clone() - S::one()).abs_val().to_f64();
            if !(gap <= PROBABILITY_TOLERANCE) {
                out.push(diag(
                    sid,
                    aid,
                    Rule::ProbabilitySum,
                    format!("probabilities sum to {}", crate::scalar::format_sig(total.to_f64(), 12)),
                ));
            }
        }
    }
    if out.is_empty() && env.tail == TailKind::Zero && env.reward_reach(1, env.start) == RewardReach::Unbounded {
        out.push(diag(
            None,
            None,
            Rule::TailMismatch,
            "tail declared zero but a reward-paying cycle is reachable".into(),
        ));
    }
    out
}

/// Incremental construction by string ids.
///
/// States are created on first mention (as a source or a target).
#[derive(Clone, Debug)]
pub struct EnvBuilder<S> {
    ids: Vec<String>,
    index: HashMap<String, StateId>,
    actions: Vec<Vec<Action<S>>>,
    start: Option<String>,
    tail: TailKind,
    reward_bound: S,
}

impl<S: Scalar> Default for EnvBuilder<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> EnvBuilder<S> {
    pub fn new() -> Self {
        EnvBuilder {
            ids: Vec::new(),
            index: HashMap::new(),
            actions: Vec::new(),
            start: None,
            tail: TailKind::Zero,
            reward_bound: S::one(),
        }
    }

    pub fn state(&mut self, id: &str) -> StateId {
        if let Some(&s) = self.index.get(id) {
            return s;
        }
        let s = self.ids.len();
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), s);
        self.actions.push(Vec::new());
        s
    }

    pub fn action(&mut self, state: &str, id: &str, reward: S, successors: &[(&str, S)]) -> &mut Self {
        let s = self.state(state);
        let successors =
            successors.iter().map(|(target, p)| Transition { target: self.state(target), prob: p.clone() }).collect();
        self.actions[s].push(Action { id: id.to_string(), reward, successors });
        self
    }

    pub fn edge(&mut self, state: &str, id: &str, reward: S, target: &str) -> &mut Self {
        self.action(state, id, reward, &[(target, S::one())])
    }

    pub fn start(&mut self, id: &str) -> &mut Self {
        self.state(id);
        self.start = Some(id.to_string());
        self
    }

    pub fn tail(&mut self, tail: TailKind) -> &mut Self {
        self.tail = tail;
        self
    }

    pub fn reward_bound(&mut self, bound: S) -> &mut Self {
        self.reward_bound = bound;
        self
    }

    pub fn build_unchecked(&self) -> Environment<S> {
        let start = self.start.as_ref().and_then(|s| self.index.get(s).copied()).unwrap_or(0);
        let states = self
            .ids
            .iter()
            .zip(&self.actions)
            .map(|(id, actions)| State { id: id.clone(), actions: actions.clone() })
            .collect();
        Environment::from_parts(states, start, self.tail, self.reward_bound.clone())
    }

    pub fn build(&self) -> Result<Environment<S>> {
        if self.ids.is_empty() {
            return Err(Error::InvalidEnvironment(vec![Diagnostic {
                state: None,
                action: None,
                rule: Rule::BadStart,
                detail: "environment has no states".into(),
            }]));
        }
        let env = self.build_unchecked();
        let diags = validate_environment(&env);
        if diags.is_empty() {
            Ok(env)
        } else {
            Err(Error::InvalidEnvironment(diags))
        }
    }
}

/// States reachable at each time from a start node, under any policy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    start_time: usize,
    layers: Vec<Vec<StateId>>,
}

impl Lattice {
    /// Layers for times `start_time..=horizon` (empty if `horizon < start_time`).
    pub fn build<S: Scalar>(env: &Environment<S>, start_time: usize, start_state: StateId, horizon: usize) -> Lattice {
        Self::build_from(env, start_time, &[start_state], horizon)
    }

    /// Like [`Lattice::build`] with several start states at `start_time`.
    pub fn build_from<S: Scalar>(
        env: &Environment<S>,
        start_time: usize,
        starts: &[StateId],
        horizon: usize,
    ) -> Lattice {
        let mut layers = Vec::new();
        if horizon >= start_time {
            let mut current: Vec<StateId> = starts.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
            for t in start_time..=horizon {
                let next: BTreeSet<StateId> = if t < horizon {
                    current.iter().flat_map(|&s| env.live_successors(s)).collect()
                } else {
                    BTreeSet::new()
                };
                layers.push(std::mem::replace(&mut current, next.into_iter().collect()));
            }
        }
        Lattice { start_time, layers }
    }

    pub fn start_time(&self) -> usize {
        self.start_time
    }

    /// Last time covered (`start_time - 1` when empty).
    pub fn horizon(&self) -> usize {
        self.start_time + self.layers.len() - 1
    }

    pub fn states_at(&self, time: usize) -> &[StateId] {
        if time < self.start_time {
            return &[];
        }
        self.layers.get(time - self.start_time).map_or(&[], Vec::as_slice)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, StateId)> + '_ {
        self.layers.iter().enumerate().flat_map(move |(i, layer)| layer.iter().map(move |&s| (self.start_time + i, s)))
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step<S> {
    pub action: ActionIdx,
    pub reward: S,
    pub state: StateId,
}

/// A history `h_{<t}`: the node the agent acts from at `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryNode<S> {
    pub time: usize,
    pub state: StateId,
    pub trace: Vec<Step<S>>,
}

impl<S: Scalar> HistoryNode<S> {
    pub fn root(env: &Environment<S>) -> Self {
        HistoryNode { time: 1, state: env.start(), trace: Vec::new() }
    }

    pub fn at(time: usize, state: StateId) -> Self {
        assert!(time >= 1);
        HistoryNode { time, state, trace: Vec::new() }
    }

    /// The history extended by one `(action, reward, successor)` step.
    pub fn advance(&self, env: &Environment<S>, action: ActionIdx, next: StateId) -> Result<Self> {
        let valid = action < env.num_actions(self.state)
            && env.successors(self.state, action).iter().any(|t| t.target == next && t.prob.is_positive());
        if !valid {
            return Err(Error::InvalidParameter(format!(
                "no edge from '{}' to state index {next} under action {action}",
                env.state_name(self.state)
            )));
        }
        let mut trace = self.trace.clone();
        trace.push(Step { action, reward: env.reward(self.state, action).clone(), state: next });
        Ok(HistoryNode { time: self.time + 1, state: next, trace })
    }
}

/// Expected reward per absolute time; zero outside `start_time..=horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardSequence<S> {
    pub start_time: usize,
    values: Vec<S>,
}

impl<S: Scalar> RewardSequence<S> {
    pub fn zeros(start_time: usize, horizon: usize) -> Self {
        RewardSequence { start_time, values: vec![S::zero(); horizon] }
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn at(&self, time: usize) -> S {
        if time == 0 || time < self.start_time {
            return S::zero();
        }
        self.values.get(time - 1).cloned().unwrap_or_else(S::zero)
    }

    /// Values for times `1..=horizon`.
    pub fn values(&self) -> &[S] {
        &self.values
    }

    fn add_at(&mut self, time: usize, x: S) {
        let slot = &mut self.values[time - 1];
        *slot = slot.clone() + x;
    }
}

/// Probability of following `path` (a sequence of states beginning at the
/// start node) when acting by `policy`. Edges the policy does not take
/// contribute probability zero.
pub fn path_probability<S: Scalar>(
    env: &Environment<S>,
    start: &HistoryNode<S>,
    policy: &Policy,
    path: &[StateId],
) -> Result<S> {
    if path.first() != Some(&start.state) {
        return Err(Error::PathStart);
    }
    let mut prob = S::one();
    for (i, pair) in path.windows(2).enumerate() {
        let t = start.time + i;
        let (s, next) = (pair[0], pair[1]);
        let a = match policy.decide(t, s) {
            Decision::Act(a) => a,
            Decision::Death => return Ok(S::zero()),
            Decision::Undefined => {
                return Err(Error::UndefinedPolicy { time: t, state: env.state_name(s).to_string() })
            }
        };
        let step: S =
            env.successors(s, a).iter().filter(|tr| tr.target == next).fold(S::zero(), |acc, tr| acc + tr.prob.clone());
        if step.is_zero() {
            return Ok(S::zero());
        }
        prob = prob * step;
    }
    Ok(prob)
}

/// `R^π(start)`: probability-weighted reward at each time up to `horizon`.
pub fn expected_rewards<S: Scalar>(
    env: &Environment<S>,
    policy: &Policy,
    start: &HistoryNode<S>,
    horizon: usize,
) -> Result<RewardSequence<S>> {
    if horizon < start.time {
        return Err(Error::HorizonBeforeStart { horizon, start: start.time });
    }
    let n = env.num_states();
    let mut out = RewardSequence::zeros(start.time, horizon);
    let mut mass = vec![S::zero(); n];
    mass[start.state] = S::one();
    for t in start.time..=horizon {
        let mut next = vec![S::zero(); n];
        for s in 0..n {
            if mass[s].is_zero() {
                continue;
            }
            let a = match policy.decide(t, s) {
                Decision::Act(a) => a,
                Decision::Death => continue,
                Decision::Undefined => {
                    return Err(Error::UndefinedPolicy { time: t, state: env.state_name(s).to_string() })
                }
            };
            out.add_at(t, mass[s].clone() * env.reward(s, a).clone());
            if t < horizon {
                for tr in env.successors(s, a) {
                    next[tr.target] = next[tr.target].clone() + mass[s].clone() * tr.prob.clone();
                }
            }
        }
        mass = next;
    }
    Ok(out)
}

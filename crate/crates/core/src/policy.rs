use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::{ActionIdx, Environment, Lattice, StateId};
use crate::scalar::Scalar;

/// What a policy does past its horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailRule {
    /// Keep acting, always with the first listed action.
    FirstAction,
    /// Take the death action: zero reward forever.
    Death,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Act(ActionIdx),
    Death,
    Undefined,
}

/// A time-indexed policy over `(time, state)` nodes.
///
/// States are assumed to carry all history the agent conditions on, so a
/// choice per `(time, state)` stands in for a choice per history.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Policy {
    start_time: usize,
    horizon: usize,
    // choices[i] holds the decisions at time start_time + i
    choices: Vec<BTreeMap<StateId, ActionIdx>>,
    tail: TailRule,
}

impl Policy {
    pub fn new(start_time: usize, horizon: usize, tail: TailRule) -> Self {
        assert!(start_time >= 1, "times start at 1");
        let len = (horizon + 1).saturating_sub(start_time);
        Policy { start_time, horizon: horizon.max(start_time - 1), choices: vec![BTreeMap::new(); len], tail }
    }

    /// Builds a policy over every node of `lattice` from a decision rule.
    pub fn from_fn(lattice: &Lattice, tail: TailRule, mut rule: impl FnMut(usize, StateId) -> ActionIdx) -> Self {
        let mut policy = Policy::new(lattice.start_time(), lattice.horizon(), tail);
        for (t, s) in lattice.nodes() {
            policy.set(t, s, rule(t, s));
        }
        policy
    }

    pub fn start_time(&self) -> usize {
        self.start_time
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn tail(&self) -> TailRule {
        self.tail
    }

    pub fn set(&mut self, time: usize, state: StateId, action: ActionIdx) {
        assert!(
            (self.start_time..=self.horizon).contains(&time),
            "time {time} outside policy range {}..={}",
            self.start_time,
            self.horizon
        );
        self.choices[time - self.start_time].insert(state, action);
    }

    pub fn decide(&self, time: usize, state: StateId) -> Decision {
        if time > self.horizon {
            return match self.tail {
                TailRule::FirstAction => Decision::Act(0),
                TailRule::Death => Decision::Death,
            };
        }
        if time < self.start_time {
            return Decision::Undefined;
        }
        match self.choices[time - self.start_time].get(&state) {
            Some(&a) => Decision::Act(a),
            None => Decision::Undefined,
        }
    }

    pub fn action(&self, time: usize, state: StateId) -> Option<ActionIdx> {
        match self.decide(time, state) {
            Decision::Act(a) => Some(a),
            _ => None,
        }
    }

    /// Decisions at one time-step.
    pub fn layer(&self, time: usize) -> Option<&BTreeMap<StateId, ActionIdx>> {
        if time < self.start_time || time > self.horizon {
            return None;
        }
        self.choices.get(time - self.start_time)
    }

    /// The same decisions up to `horizon`, death afterwards.
    pub fn truncated(&self, horizon: usize) -> Policy {
        let mut out = Policy::new(self.start_time, horizon.min(self.horizon), TailRule::Death);
        for (i, layer) in out.choices.iter_mut().enumerate() {
            *layer = self.choices[i].clone();
        }
        out
    }

    /// Extends the horizon, leaving the new layers empty.
    pub fn extended(&self, horizon: usize, tail: TailRule) -> Policy {
        let mut out = Policy::new(self.start_time, horizon.max(self.horizon), tail);
        for (i, layer) in self.choices.iter().enumerate() {
            out.choices[i] = layer.clone();
        }
        out
    }

    /// `(time, state, action)` triples in time order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, StateId, ActionIdx)> + '_ {
        self.choices
            .iter()
            .enumerate()
            .flat_map(move |(i, layer)| layer.iter().map(move |(&s, &a)| (self.start_time + i, s, a)))
    }

    /// Human-readable rows `(time, state id, action id)`.
    pub fn describe<S: Scalar>(&self, env: &Environment<S>) -> Vec<PolicyRow> {
        self.entries()
            .map(|(t, s, a)| PolicyRow {
                time: t,
                state: env.state_name(s).to_string(),
                action: env.action_name(s, a).to_string(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub time: usize,
    pub state: String,
    pub action: String,
}

//! Sub-game perfect equilibria of the game played by the agent's selves.
//!
//! Player `t` chooses the action at time `t` only and scores the outcome with
//! column `δ^t`. Finite games are obtained by truncation: players `1..=T`
//! act and every reward after `T` is zero, which is what a forced death
//! action at `T + 1` amounts to.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::builtin::split_game;
use crate::discount::{DiscountVector, Support};
use crate::env::{ActionIdx, Environment, HistoryNode, Lattice, StateId};
use crate::error::{Error, Result};
use crate::matrix::{ColumnRule, DiscountMatrix};
use crate::planning::{action_value, evaluate_lattice, last_reward_time, optimal_policy, NodeValues};
use crate::policy::{Decision, Policy, TailRule};
use crate::scalar::{Rational, Scalar};

/// Default cap on candidate profiles for exhaustive searches.
pub const DEFAULT_BUDGET: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// Take the lowest-index maximiser.
    #[default]
    LowestIndex,
    /// Same choice, but log every node where the maximiser is not unique.
    RecordAll,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TieRecord {
    pub time: usize,
    pub state: StateId,
    pub actions: Vec<ActionIdx>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpeResult<S> {
    /// Decisions of players `1..=horizon`, death afterwards.
    pub policy: Policy,
    /// The full profile including any continuation players past `horizon`.
    pub profile: Policy,
    pub horizon: usize,
    /// `(t, s, V_{δ^t}(t, s))` at every lattice node up to `horizon`.
    pub per_player_values: Vec<(usize, StateId, S)>,
    pub tie_log: Vec<TieRecord>,
    /// Largest reward mass any player's column puts past the truncation.
    pub tail_slack: S,
}

impl<S: Scalar> SpeResult<S> {
    /// `V_{δ^t}` at one node.
    pub fn player_value(&self, time: usize, state: StateId) -> Option<&S> {
        self.per_player_values.iter().find(|(t, s, _)| *t == time && *s == state).map(|(_, _, v)| v)
    }
}

struct Game<'a, S> {
    env: &'a Environment<S>,
    columns: Vec<DiscountVector<S>>,
    lattice: Lattice,
    players: usize,
    end: usize,
}

impl<'a, S: Scalar> Game<'a, S> {
    fn new(env: &'a Environment<S>, m: &DiscountMatrix<S>, players: usize, end: usize) -> Result<Self> {
        if players < 1 {
            return Err(Error::InvalidParameter("an equilibrium needs at least one player".into()));
        }
        let columns = (1..=players).map(|k| m.column(k)).collect::<Result<Vec<_>>>()?;
        let lattice = Lattice::build(env, 1, env.start(), end);
        Ok(Game { env, columns, lattice, players, end })
    }

    fn weight(&self, player: usize, t: usize) -> S {
        if t <= self.end {
            self.columns[player - 1].entry(t)
        } else {
            S::zero()
        }
    }

    /// Player `t`'s continuation values, given decisions after `t`.
    fn continuation(&self, profile: &Policy, t: usize) -> Result<NodeValues<S>> {
        evaluate_lattice(self.env, &self.lattice, profile, t + 1, |u| self.weight(t, u))
    }

    /// Maximisers at every node of layer `t` plus the best value.
    fn best_responses(&self, profile: &Policy, t: usize) -> Result<Vec<(StateId, Vec<ActionIdx>, S)>> {
        let values = self.continuation(profile, t)?;
        let w = self.weight(t, t);
        let mut out = Vec::new();
        for &s in self.lattice.states_at(t) {
            let q: Vec<S> =
                (0..self.env.num_actions(s)).map(|a| action_value(self.env, &values, t, s, a, &w)).collect();
            let mut best = q[0].clone();
            for x in &q[1..] {
                if *x > best {
                    best = x.clone();
                }
            }
            let argmax = (0..q.len()).filter(|&a| q[a] == best).collect();
            out.push((s, argmax, best));
        }
        Ok(out)
    }

    fn tail_slack(&self) -> Result<S> {
        let env_last = last_reward_time(self.env, 1, &[self.env.start()]);
        if env_last.is_some_and(|last| last <= self.end) {
            return Ok(S::zero());
        }
        let mut slack = S::zero();
        for c in &self.columns {
            let mass = c.tail_mass(self.end).ok_or(Error::NonSummable { age: c.age() })?;
            let x = self.env.reward_bound().clone() * mass;
            if x > slack {
                slack = x;
            }
        }
        Ok(slack)
    }

    fn result(
        &self,
        profile: Policy,
        tie_log: Vec<TieRecord>,
        values: Vec<(usize, StateId, S)>,
        slack: S,
    ) -> SpeResult<S> {
        let mut per_player_values = values;
        per_player_values.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        SpeResult {
            policy: profile.truncated(self.players),
            profile,
            horizon: self.players,
            per_player_values,
            tie_log,
            tail_slack: slack,
        }
    }
}

/// Backward induction on the game truncated after `horizon`.
pub fn spe_backward_induction<S: Scalar>(
    env: &Environment<S>,
    m: &DiscountMatrix<S>,
    horizon: usize,
    tie_rule: TieRule,
) -> Result<SpeResult<S>> {
    let game = Game::new(env, m, horizon, horizon)?;
    let slack = game.tail_slack()?;
    let mut profile = Policy::new(1, horizon, TailRule::Death);
    let mut ties = Vec::new();
    let mut values = Vec::new();
    for t in (1..=horizon).rev() {
        for (s, argmax, best) in game.best_responses(&profile, t)? {
            if tie_rule == TieRule::RecordAll && argmax.len() > 1 {
                ties.push(TieRecord { time: t, state: s, actions: argmax.clone() });
            }
            profile.set(t, s, argmax[0]);
            values.push((t, s, best));
        }
    }
    ties.sort_by(|a, b| (a.time, a.state).cmp(&(b.time, b.state)));
    Ok(game.result(profile, ties, values, slack))
}

/// How far past `horizon` the players' columns still see rewards.
///
/// A player near the end of a truncated game cares about times after the
/// truncation. Enumeration lets those later times be played by unconstrained
/// continuation players, so equilibria of the untruncated game are not lost
/// to an artificial end effect.
pub fn spe_window<S: Scalar>(env: &Environment<S>, m: &DiscountMatrix<S>, horizon: usize) -> Result<usize> {
    let env_last = last_reward_time(env, 1, &[env.start()]);
    let mut end = horizon;
    for k in 1..=horizon {
        let column = m.column(k)?;
        let column_end = match column.support() {
            Support::Empty => None,
            Support::EndsAt(t) => Some(t),
            Support::Unbounded => None,
        };
        let reach = match (column_end, env_last, column.support()) {
            (_, _, Support::Empty) => horizon,
            (Some(a), Some(b), _) => a.min(b),
            (Some(a), None, _) => a,
            (None, Some(b), _) => b,
            (None, None, _) => {
                return Err(Error::Precondition(format!(
                    "column {k} has unbounded support and the environment keeps paying rewards"
                )))
            }
        };
        end = end.max(reach);
    }
    Ok(end - horizon)
}

/// Every equilibrium of the game with players `1..=horizon`, found by
/// backward induction branching on exact ties, over every continuation
/// inside [`spe_window`]. Results are deduplicated on players `1..=horizon`.
pub fn enumerate_spe<S: Scalar>(
    env: &Environment<S>,
    m: &DiscountMatrix<S>,
    horizon: usize,
    budget: u128,
) -> Result<Vec<SpeResult<S>>> {
    let lookahead = spe_window(env, m, horizon)?;
    let game = Game::new(env, m, horizon, horizon + lookahead)?;
    let slack = game.tail_slack()?;
    let free: Vec<(usize, StateId)> = game.lattice.nodes().filter(|(t, _)| *t > horizon).collect();
    let radices: Vec<usize> = free.iter().map(|&(_, s)| env.num_actions(s)).collect();
    let needed = radices.iter().fold(1u128, |acc, &r| acc.saturating_mul(r as u128));
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let mut found: BTreeSet<Policy> = BTreeSet::new();
    let mut out = Vec::new();
    let mut leaves = 0u128;
    let mut digits = vec![0usize; free.len()];
    loop {
        let mut profile = Policy::new(1, game.end, TailRule::Death);
        for (&(t, s), &a) in free.iter().zip(&digits) {
            profile.set(t, s, a);
        }
        let mut ctx =
            Branch { game: &game, found: &mut found, out: &mut out, leaves: &mut leaves, budget, slack: &slack };
        ctx.descend(profile, horizon, Vec::new())?;
        if !advance(&mut digits, &radices) {
            break;
        }
    }
    out.sort_by(|a, b| a.policy.cmp(&b.policy));
    Ok(out)
}

struct Branch<'g, 'a, S> {
    game: &'g Game<'a, S>,
    found: &'g mut BTreeSet<Policy>,
    out: &'g mut Vec<SpeResult<S>>,
    leaves: &'g mut u128,
    budget: u128,
    slack: &'g S,
}

impl<S: Scalar> Branch<'_, '_, S> {
    fn descend(&mut self, profile: Policy, t: usize, values: Vec<(usize, StateId, S)>) -> Result<()> {
        if t == 0 {
            *self.leaves += 1;
            if *self.leaves > self.budget {
                return Err(Error::BudgetExceeded { needed: *self.leaves, budget: self.budget });
            }
            let projected = profile.truncated(self.game.players);
            if self.found.insert(projected) {
                let ties = Vec::new();
                self.out.push(self.game.result(profile, ties, values, self.slack.clone()));
            }
            return Ok(());
        }
        let layer = self.game.best_responses(&profile, t)?;
        let radices: Vec<usize> = layer.iter().map(|(_, argmax, _)| argmax.len()).collect();
        let mut digits = vec![0usize; layer.len()];
        loop {
            let mut next = profile.clone();
            let mut vals = values.clone();
            for ((s, argmax, best), &d) in layer.iter().zip(&digits) {
                next.set(t, *s, argmax[d]);
                vals.push((t, *s, best.clone()));
            }
            self.descend(next, t - 1, vals)?;
            if !advance(&mut digits, &radices) {
                return Ok(());
            }
        }
    }
}

/// Mixed-radix increment; false once every combination has been visited.
pub(crate) fn advance(digits: &mut [usize], radices: &[usize]) -> bool {
    for (d, &r) in digits.iter_mut().zip(radices) {
        *d += 1;
        if *d < r {
            return true;
        }
        *d = 0;
    }
    false
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation<S> {
    pub time: usize,
    pub state: StateId,
    pub action: ActionIdx,
    pub gain: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport<S> {
    pub ok: bool,
    pub violation: Option<Violation<S>>,
}

/// One-deviation check for players `1..=horizon`. Rewards count up to the
/// later of `horizon` and the policy's own horizon.
pub fn verify_spe<S: Scalar>(
    env: &Environment<S>,
    m: &DiscountMatrix<S>,
    policy: &Policy,
    horizon: usize,
    tol: &S,
) -> Result<VerifyReport<S>> {
    let end = horizon.max(policy.horizon());
    let game = Game::new(env, m, horizon, end)?;
    for t in 1..=horizon {
        let values = game.continuation(policy, t)?;
        let w = game.weight(t, t);
        for &s in game.lattice.states_at(t) {
            let chosen = match policy.decide(t, s) {
                Decision::Act(a) => a,
                _ => return Err(Error::UndefinedPolicy { time: t, state: env.state_name(s).to_string() }),
            };
            let current = action_value(env, &values, t, s, chosen, &w);
            for a in 0..env.num_actions(s) {
                let gain = action_value(env, &values, t, s, a, &w) - current.clone();
                if gain > *tol {
                    return Ok(VerifyReport {
                        ok: false,
                        violation: Some(Violation { time: t, state: s, action: a, gain }),
                    });
                }
            }
        }
    }
    Ok(VerifyReport { ok: true, violation: None })
}

/// First time at which the policies choose differently at some node
/// reachable within `horizon`.
pub fn first_difference<S: Scalar>(p1: &Policy, p2: &Policy, env: &Environment<S>, horizon: usize) -> Option<usize> {
    let lattice = Lattice::build(env, 1, env.start(), horizon);
    let first = lattice.nodes().find(|&(t, s)| p1.decide(t, s) != p2.decide(t, s)).map(|(t, _)| t);
    first
}

/// `exp(-t*)` with `t*` the first differing time; 0 when the policies agree
/// through `horizon`.
pub fn policy_distance<S: Scalar>(p1: &Policy, p2: &Policy, env: &Environment<S>, horizon: usize) -> f64 {
    first_difference(p1, p2, env, horizon).map_or(0.0, |t| (-(t as f64)).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub horizon: usize,
    /// First time the equilibria at `horizon - 1` and `horizon` disagree.
    pub first_difference: Option<usize>,
    pub distance: f64,
}

/// Distances between equilibria of consecutive truncations `T - 1`, `T`.
pub fn spe_convergence<S: Scalar>(
    env: &Environment<S>,
    m: &DiscountMatrix<S>,
    t_max: usize,
) -> Result<Vec<ConvergenceRow>> {
    let mut rows = Vec::new();
    let mut previous = spe_backward_induction(env, m, 1, TieRule::LowestIndex)?;
    for horizon in 2..=t_max {
        let current = spe_backward_induction(env, m, horizon, TieRule::LowestIndex)?;
        let first = first_difference(&previous.policy, &current.policy, env, horizon - 1);
        rows.push(ConvergenceRow {
            horizon,
            first_difference: first,
            distance: first.map_or(0.0, |t| (-(t as f64)).exp()),
        });
        previous = current;
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonExpectimaxReport {
    pub seed: u64,
    /// Equilibrium actions along the path from each sub-game's root.
    pub spe_path_a: Vec<String>,
    pub spe_path_b: Vec<String>,
    pub spe_differs: bool,
    /// Nonincreasing random vectors plus the geometric grid.
    pub monotone_samples: usize,
    pub grid_points: usize,
    pub acting_identically: usize,
    pub matching_spe: usize,
    /// Monotone or grid vectors that behaved differently in the two sub-games.
    pub counterexamples: Vec<Vec<f64>>,
    /// Arbitrary nonnegative vectors: behaviour may differ across sub-games,
    /// but an expectimax policy still never reproduces the equilibrium.
    pub unrestricted_samples: usize,
    pub unrestricted_acting_differently: usize,
    pub unrestricted_matching_spe: usize,
}

impl NonExpectimaxReport {
    pub fn holds(&self) -> bool {
        self.spe_differs
            && self.counterexamples.is_empty()
            && self.matching_spe == 0
            && self.unrestricted_matching_spe == 0
            && self.acting_identically == self.monotone_samples + self.grid_points
    }
}

/// The columns under which the equilibrium of the split game is not the
/// optimum of any single discount vector.
pub fn split_game_matrix() -> DiscountMatrix<Rational> {
    let q = |n| Rational::from_ratio(n, 1);
    let z = || q(0);
    DiscountMatrix::from_rows(
        &[vec![q(1)], vec![z(), q(2), q(1), q(2)], vec![z(), z(), q(3), q(1)], vec![z(), z(), z(), q(1)]],
        ColumnRule::RepeatLast,
    )
    .expect("well-formed")
}

fn path_from<S: Scalar>(
    env: &Environment<S>,
    policy: &Policy,
    time: usize,
    state: StateId,
    until: usize,
) -> Vec<String> {
    let mut out = Vec::new();
    let (mut t, mut s) = (time, state);
    while t <= until {
        let a = match policy.decide(t, s) {
            Decision::Act(a) => a,
            _ => break,
        };
        out.push(env.action_name(s, a).to_string());
        s = env.successors(s, a).iter().find(|tr| tr.prob.is_positive()).map(|tr| tr.target).expect("valid");
        t += 1;
    }
    out
}

/// Compares the equilibrium of the split game with the optimal policies of
/// sampled single discount vectors.
pub fn check_non_expectimax(sample_count: usize, seed: u64) -> Result<NonExpectimaxReport> {
    let env = split_game::<Rational>();
    let m = split_game_matrix();
    let last = 4;
    let spe = spe_backward_induction(&env, &m, last, TieRule::LowestIndex)?;
    let (a_root, b_root) = (env.state_index("A.S").expect("A"), env.state_index("B.S").expect("B"));
    let spe_a = path_from(&env, &spe.policy, 2, a_root, last);
    let spe_b = path_from(&env, &spe.policy, 2, b_root, last);

    let behaviour = |v: &DiscountVector<Rational>| -> Result<(Vec<String>, Vec<String>)> {
        let (policy, _) = optimal_policy(&env, v, &HistoryNode::root(&env), &Rational::from_ratio(0, 1))?;
        Ok((path_from(&env, &policy, 2, a_root, last), path_from(&env, &policy, 2, b_root, last)))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |sorted: bool| -> Vec<Rational> {
        loop {
            let mut xs: Vec<i64> = (0..last).map(|_| rng.gen_range(0..=1000)).collect();
            if sorted {
                xs.sort_unstable_by(|a, b| b.cmp(a));
            }
            if xs[1..].iter().any(|&x| x > 0) {
                return xs.into_iter().map(|x| Rational::from_ratio(x, 1000)).collect();
            }
        }
    };

    let mut candidates: Vec<DiscountVector<Rational>> =
        (0..sample_count).map(|_| DiscountVector::explicit(1, draw(true))).collect();
    let grid: Vec<DiscountVector<Rational>> = (1..100)
        .map(|k| {
            let g = Rational::from_ratio(k, 100);
            DiscountVector::explicit(1, (1..=last as u64).map(|t| g.powu(t)).collect())
        })
        .collect();
    let grid_points = grid.len();
    candidates.extend(grid);

    let mut acting_identically = 0;
    let mut matching_spe = 0;
    let mut counterexamples = Vec::new();
    for v in &candidates {
        let (pa, pb) = behaviour(v)?;
        if pa == pb {
            acting_identically += 1;
        } else {
            counterexamples.push(v.head().iter().map(Scalar::to_f64).collect());
        }
        if pa == spe_a && pb == spe_b {
            matching_spe += 1;
        }
    }

    let mut unrestricted_acting_differently = 0;
    let mut unrestricted_matching_spe = 0;
    for _ in 0..sample_count {
        let v = DiscountVector::explicit(1, draw(false));
        let (pa, pb) = behaviour(&v)?;
        if pa != pb {
            unrestricted_acting_differently += 1;
        }
        if pa == spe_a && pb == spe_b {
            unrestricted_matching_spe += 1;
        }
    }

    Ok(NonExpectimaxReport {
        seed,
        spe_differs: spe_a != spe_b,
        spe_path_a: spe_a,
        spe_path_b: spe_b,
        monotone_samples: sample_count,
        grid_points,
        acting_identically,
        matching_spe,
        counterexamples,
        unrestricted_samples: sample_count,
        unrestricted_acting_differently,
        unrestricted_matching_spe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{three_step_game, three_step_matrix, zigzag};
    use crate::discount::Family;
    use crate::env::expected_rewards;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn three_step_equilibrium_moves_down() {
        let env = three_step_game::<Rational>();
        let m = three_step_matrix::<Rational>();
        let spe = spe_backward_induction(&env, &m, 3, TieRule::LowestIndex).unwrap();
        let root = env.start();
        assert_eq!(env.action_name(root, spe.policy.action(1, root).unwrap()), "down");
        assert_eq!(spe.player_value(1, root), Some(&q(8, 1)));
        assert!(verify_spe(&env, &m, &spe.policy, 3, &q(0, 1)).unwrap().ok);
        assert_eq!(enumerate_spe(&env, &m, 3, DEFAULT_BUDGET).unwrap().len(), 1);
    }

    #[test]
    fn deviation_found_for_right_right() {
        let env = three_step_game::<Rational>();
        let m = three_step_matrix::<Rational>();
        let lattice = Lattice::build(&env, 1, env.start(), 3);
        let mut policy = Policy::from_fn(&lattice, TailRule::Death, |_, s| env.action_index(s, "right").unwrap_or(0));
        policy = policy.truncated(3);
        let report = verify_spe(&env, &m, &policy, 3, &q(0, 1)).unwrap();
        let v = report.violation.unwrap();
        assert_eq!((v.time, env.state_name(v.state), env.action_name(v.state, v.action)), (2, "c", "down"));
        assert_eq!(v.gain, q(3, 1));
    }

    #[test]
    fn zigzag_truncation_parity() {
        let env = zigzag::<Rational>(10).unwrap();
        let m = DiscountMatrix::family(Family::ConstantHorizon { horizon: 2 }).unwrap();
        let b1 = env.start();
        let up = |h: usize| {
            let spe = spe_backward_induction(&env, &m, h, TieRule::LowestIndex).unwrap();
            env.action_name(b1, spe.policy.action(1, b1).unwrap()).to_string()
        };
        assert_eq!(up(5), "up");
        assert_eq!(up(6), "right");
    }

    #[test]
    fn zigzag_has_two_equilibria() {
        let env = zigzag::<Rational>(10).unwrap();
        let m = DiscountMatrix::family(Family::ConstantHorizon { horizon: 2 }).unwrap();
        for horizon in [5, 6] {
            let all = enumerate_spe(&env, &m, horizon, DEFAULT_BUDGET).unwrap();
            assert_eq!(all.len(), 2);
            let mut seqs: Vec<Vec<Rational>> = all
                .iter()
                .map(|r| expected_rewards(&env, &r.policy, &HistoryNode::root(&env), 3).unwrap().values().to_vec())
                .collect();
            seqs.sort();
            assert_eq!(seqs, vec![vec![q(0, 1), q(2, 3), q(0, 1)], vec![q(1, 2), q(0, 1), q(0, 1)]]);
            for r in &all {
                assert!(verify_spe(&env, &m, &r.profile, horizon, &q(0, 1)).unwrap().ok);
            }
        }
    }

    #[test]
    fn distances_between_policies() {
        let env = zigzag::<Rational>(6).unwrap();
        let m = DiscountMatrix::family(Family::ConstantHorizon { horizon: 2 }).unwrap();
        let all = enumerate_spe(&env, &m, 4, DEFAULT_BUDGET).unwrap();
        assert!((policy_distance(&all[0].policy, &all[1].policy, &env, 4) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(policy_distance(&all[0].policy, &all[0].policy, &env, 4), 0.0);
    }

    #[test]
    fn fixed_lifetime_converges() {
        let env = zigzag::<Rational>(12).unwrap();
        let m = DiscountMatrix::family(Family::FixedLifetime { lifetime: 4 }).unwrap();
        let rows = spe_convergence(&env, &m, 8).unwrap();
        assert!(rows.iter().filter(|r| r.horizon > 4).all(|r| r.distance == 0.0));
    }

    #[test]
    fn split_game_report() {
        let r = check_non_expectimax(30, 7).unwrap();
        assert!(r.spe_differs);
        assert_eq!(r.spe_path_a[0], "down");
        assert_eq!(r.spe_path_b[..3], ["right", "right", "down"]);
        assert!(r.holds(), "{r:?}");
        let empty = check_non_expectimax(0, 7).unwrap();
        assert!(empty.spe_differs);
        assert_eq!(empty.unrestricted_samples, 0);
    }
}

//! Named example environments.

use crate::env::{EnvBuilder, Environment, TailKind};
use crate::error::{Error, Result};
use crate::matrix::{ColumnRule, DiscountMatrix};
use crate::scalar::Scalar;

/// Choosing pizza or pasta each evening, with a dislike of repeats.
pub fn pizza_pasta<S: Scalar>() -> Environment<S> {
    let r = |n| S::from_ratio(n, 10);
    let mut b = EnvBuilder::new();
    b.start("S")
        .edge("S", "pizza", r(10), "pizza")
        .edge("S", "pasta", r(8), "pasta")
        .edge("pizza", "pizza", r(7), "pizza")
        .edge("pizza", "pasta", r(8), "pasta")
        .edge("pasta", "pizza", r(10), "pizza")
        .edge("pasta", "pasta", r(5), "pasta")
        .tail(TailKind::Loop);
    b.build().expect("valid by construction")
}

/// Delayed-reward chain: moving up from the bottom node at time `t` pays
/// `t/(t+1)` once; moving right pays nothing. `length` bottom nodes offer the
/// choice, after which everything pays zero.
pub fn zigzag<S: Scalar>(length: usize) -> Result<Environment<S>> {
    if length < 1 {
        return Err(Error::InvalidParameter("zig-zag needs at least one step".into()));
    }
    let mut b = EnvBuilder::new();
    b.start("b1");
    for t in 1..=length {
        let reward = S::from_ratio(t as i64, t as i64 + 1);
        b.edge(&format!("b{t}"), "up", reward, &format!("u{}", t + 1));
        b.edge(&format!("b{t}"), "right", S::zero(), &format!("b{}", t + 1));
        if t >= 2 {
            b.edge(&format!("u{t}"), "right", S::zero(), &format!("u{}", t + 1));
        }
    }
    let end = length + 1;
    b.edge(&format!("b{end}"), "right", S::zero(), &format!("b{end}"));
    b.edge(&format!("u{end}"), "right", S::zero(), &format!("u{end}"));
    b.build()
}

fn three_step_into<S: Scalar>(b: &mut EnvBuilder<S>, prefix: &str, right_down: S) {
    let n = |s: &str| format!("{prefix}{s}");
    let int = |x| S::from_ratio(x, 1);
    b.edge(&n("S"), "down", int(4), &n("b"))
        .edge(&n("S"), "right", int(1), &n("c"))
        .edge(&n("c"), "down", right_down, &n("d"))
        .edge(&n("c"), "right", int(1), &n("e"))
        .edge(&n("e"), "down", int(3), &n("f"));
    for end in ["b", "d", "f"] {
        b.edge(&n(end), "stay", S::zero(), &n(end));
    }
}

/// Three decisions with rewards 4 (down), then 1 and 3, then 1, 3.
pub fn three_step_game<S: Scalar>() -> Environment<S> {
    let mut b = EnvBuilder::new();
    b.start("S");
    three_step_into(&mut b, "", S::from_ratio(3, 1));
    b.reward_bound(S::from_ratio(4, 1));
    b.build().expect("valid by construction")
}

/// Columns under which the three-step game's selves disagree: the first
/// self wants right-right-down, the second prefers right-down.
pub fn three_step_matrix<S: Scalar>() -> DiscountMatrix<S> {
    let int = |x| S::from_ratio(x, 1);
    DiscountMatrix::from_rows(
        &[vec![int(2), int(1), int(2)], vec![int(0), int(3), int(1)], vec![int(0), int(0), int(1)]],
        ColumnRule::RepeatLast,
    )
    .expect("well-formed")
}

/// A fair coin sends the agent into one of two copies of the three-step
/// game; copy `B` pays 1 instead of 3 for right-then-down.
pub fn split_game<S: Scalar>() -> Environment<S> {
    let half = S::from_ratio(1, 2);
    let mut b = EnvBuilder::new();
    b.start("root").action("root", "go", S::zero(), &[("A.S", half.clone()), ("B.S", half)]);
    three_step_into(&mut b, "A.", S::from_ratio(3, 1));
    three_step_into(&mut b, "B.", S::from_ratio(1, 1));
    b.reward_bound(S::from_ratio(4, 1));
    b.build().expect("valid by construction")
}

/// Chain where stepping down at time `j + 1` locks in reward `1 - ε^j`
/// forever; the node at time `t` can only step down.
pub fn lower_bound_chain<S: Scalar>(epsilon: &S, t: usize) -> Result<Environment<S>> {
    if !(epsilon.is_positive() && *epsilon < S::one()) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    if t < 3 {
        return Err(Error::InvalidParameter(format!("chain length t must be at least 3, got {t}")));
    }
    let mut b = EnvBuilder::new();
    b.start("S").edge("S", "right", S::zero(), "c2");
    for j in 2..=t {
        let reward = S::one() - epsilon.powu(j as u64 - 1);
        let node = format!("c{j}");
        let exit = format!("l{j}");
        if j < t {
            b.edge(&node, "right", S::zero(), &format!("c{}", j + 1));
            b.edge(&node, "down", reward.clone(), &exit);
            b.edge(&exit, "stay", reward, &exit);
        } else {
            b.edge(&node, "down", reward, "z");
            b.edge("z", "stay", S::zero(), "z");
        }
    }
    b.tail(TailKind::Loop);
    b.build()
}

/// Every built-in name with its parameter hint.
pub const BUILTIN_NAMES: &[(&str, &str)] = &[
    ("pizza-pasta", ""),
    ("zigzag", "length (default 60)"),
    ("three-step", ""),
    ("split", ""),
    ("lower-bound", "epsilon, t"),
];

/// Parameters for [`build_named`].
#[derive(Clone, Debug, Default)]
pub struct BuiltinParams<S> {
    pub length: Option<usize>,
    pub epsilon: Option<S>,
    pub t: Option<usize>,
}

pub fn build_named<S: Scalar>(name: &str, params: &BuiltinParams<S>) -> Result<Environment<S>> {
    match name.replace('_', "-").as_str() {
        "pizza-pasta" => Ok(pizza_pasta()),
        "zigzag" | "zig-zag" => zigzag(params.length.unwrap_or(60)),
        "three-step" => Ok(three_step_game()),
        "split" => Ok(split_game()),
        "lower-bound" => {
            let eps =
                params.epsilon.clone().ok_or_else(|| Error::InvalidParameter("lower-bound needs epsilon".into()))?;
            let t = params.t.ok_or_else(|| Error::InvalidParameter("lower-bound needs t".into()))?;
            lower_bound_chain(&eps, t)
        }
        _ => Err(Error::UnknownEnvironment(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::validate_environment;
    use crate::scalar::Rational;

    #[test]
    fn all_builtins_validate() {
        assert!(validate_environment(&pizza_pasta::<f64>()).is_empty());
        assert!(validate_environment(&zigzag::<Rational>(8).unwrap()).is_empty());
        assert!(validate_environment(&three_step_game::<Rational>()).is_empty());
        assert!(validate_environment(&split_game::<Rational>()).is_empty());
        let eps = Rational::from_ratio(1, 100);
        assert!(validate_environment(&lower_bound_chain(&eps, 5).unwrap()).is_empty());
    }

    #[test]
    fn three_step_edges() {
        let env = three_step_game::<Rational>();
        assert_eq!(env.num_states(), 6);
        let mut rewards: Vec<String> =
            env.states().iter().flat_map(|s| s.actions.iter().map(|a| a.reward.to_string())).collect();
        rewards.sort();
        assert_eq!(rewards, vec!["0", "0", "0", "1", "1", "3", "3", "4"]);
    }

    #[test]
    fn zigzag_up_rewards() {
        let env = zigzag::<Rational>(4).unwrap();
        let ups: Vec<String> = (1..=4)
            .map(|t| {
                let s = env.state_index(&format!("b{t}")).unwrap();
                env.reward(s, env.action_index(s, "up").unwrap()).to_string()
            })
            .collect();
        assert_eq!(ups, vec!["1/2", "2/3", "3/4", "4/5"]);
    }

    #[test]
    fn lower_bound_rewards_and_parameters() {
        let eps = Rational::from_ratio(1, 100);
        let env = lower_bound_chain(&eps, 5).unwrap();
        let downs: Vec<f64> = (2..=5)
            .map(|j| {
                let s = env.state_index(&format!("c{j}")).unwrap();
                Scalar::to_f64(env.reward(s, env.action_index(s, "down").unwrap()))
            })
            .collect();
        assert_eq!(downs, vec![0.99, 0.9999, 0.999999, 0.99999999]);
        assert!(lower_bound_chain(&eps, 2).is_err());
        assert!(lower_bound_chain(&Rational::from_ratio(1, 1), 5).is_err());
        assert!(build_named::<f64>("nope", &BuiltinParams::default()).is_err());
    }
}

//! Instance collections for property checks and sweeps: the named examples
//! paired with matching discount matrices, and seeded random generators.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::builtin::{lower_bound_chain, pizza_pasta, split_game, three_step_game, three_step_matrix, zigzag};
use crate::discount::{make_discount, DiscountVector, Family};
use crate::env::{EnvBuilder, Environment, TailKind};
use crate::equilibrium::split_game_matrix;
use crate::error::Result;
use crate::matrix::{ColumnRule, DiscountMatrix};
use crate::regret::build_lower_bound_instance;
use crate::scalar::{Rational, Scalar};

#[derive(Clone, Debug)]
pub struct ZooInstance<S> {
    pub name: String,
    pub env: Environment<S>,
    pub matrix: DiscountMatrix<S>,
    /// Seed of the generator, for random instances.
    pub seed: Option<u64>,
}

impl<S: Scalar> ZooInstance<S> {
    /// Whether every path stops paying after some known time.
    pub fn finite(&self) -> bool {
        self.env.reward_reach(1, self.env.start()).last_time(1).is_some()
    }
}

fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

fn named(name: &str, env: Environment<Rational>, matrix: DiscountMatrix<Rational>) -> ZooInstance<Rational> {
    ZooInstance { name: name.to_string(), env, matrix, seed: None }
}

/// The named environments under the discount matrices they illustrate.
pub fn named_instances() -> Vec<ZooInstance<Rational>> {
    let family = |f| DiscountMatrix::family(f).expect("valid family");
    let zz = || zigzag::<Rational>(8).expect("valid length");
    let geometric_base = make_discount::<Rational>(&Family::Geometric { gamma: q(4, 5) }, 1).expect("valid");
    let alphas = vec![q(1, 1), q(3, 1), q(1, 2), q(7, 3), q(2, 1), q(5, 4), q(1, 1), q(9, 2), q(1, 3)];
    let scaled = crate::matrix::make_consistent_matrix(geometric_base, Some(alphas)).expect("positive alphas");
    let truncated_hyperbolic = DiscountMatrix::from_rows(
        &(1..=9)
            .map(|k| (1..=9).map(|t| if t < k { q(0, 1) } else { q(1, 1 + (t - k) as i64) }).collect())
            .collect::<Vec<_>>(),
        ColumnRule::RepeatLast,
    )
    .expect("well-formed");
    let (chain, chain_matrix) = build_lower_bound_instance(&q(1, 10), 5, &q(1, 100)).expect("valid parameters");
    vec![
        named("three-step", three_step_game(), three_step_matrix()),
        named("split", split_game(), split_game_matrix()),
        named("zigzag/constant-horizon-2", zz(), family(Family::ConstantHorizon { horizon: 2 })),
        named("zigzag/fixed-lifetime-5", zz(), family(Family::FixedLifetime { lifetime: 5 })),
        named("zigzag/geometric-0.9", zz(), family(Family::Geometric { gamma: q(9, 10) })),
        named("zigzag/truncated-hyperbolic", zz(), truncated_hyperbolic),
        named("three-step/scaled-geometric", three_step_game(), scaled),
        named("pizza-pasta/geometric-0.5", pizza_pasta(), family(Family::Geometric { gamma: q(1, 2) })),
        named("pizza-pasta/constant-horizon-3", pizza_pasta(), family(Family::ConstantHorizon { horizon: 3 })),
        named("lower-bound", chain, chain_matrix),
        named(
            "lower-bound/fixed-lifetime-4",
            lower_bound_chain(&q(1, 10), 4).expect("valid parameters"),
            family(Family::FixedLifetime { lifetime: 4 }),
        ),
    ]
}

/// Shape limits for [`random_env`].
#[derive(Clone, Copy, Debug)]
pub struct EnvShape {
    pub depth: usize,
    pub width: usize,
    pub actions: usize,
}

impl Default for EnvShape {
    fn default() -> Self {
        EnvShape { depth: 4, width: 2, actions: 3 }
    }
}

/// Layered random environment: up to `depth` decision layers of at most
/// `width` states, each with 1 to `actions` actions paying a multiple of
/// 1/4 and moving to one or two states of the next layer. A zero-reward
/// absorbing state follows the last layer.
pub fn random_env(rng: &mut ChaCha8Rng, shape: EnvShape) -> Environment<Rational> {
    let depth = rng.gen_range(1..=shape.depth.max(1));
    let widths: Vec<usize> =
        (1..=depth).map(|i| if i == 1 { 1 } else { rng.gen_range(1..=shape.width.max(1)) }).collect();
    let name = |layer: usize, i: usize| if layer > depth { "end".to_string() } else { format!("s{layer}.{i}") };
    let mut b = EnvBuilder::new();
    b.start(&name(1, 0));
    for layer in 1..=depth {
        let next_width = if layer == depth { 1 } else { widths[layer] };
        for i in 0..widths[layer - 1] {
            for a in 0..rng.gen_range(1..=shape.actions.max(1)) {
                let reward = q(rng.gen_range(0..=4), 4);
                let first = rng.gen_range(0..next_width);
                let second = rng.gen_range(0..next_width);
                let state = name(layer, i);
                let id = format!("a{a}");
                if first != second && rng.gen_bool(0.5) {
                    let p = q(rng.gen_range(1..=3), 4);
                    let rest = q(1, 1) - p.clone();
                    b.action(&state, &id, reward, &[(&name(layer + 1, first), p), (&name(layer + 1, second), rest)]);
                } else {
                    b.edge(&state, &id, reward, &name(layer + 1, first));
                }
            }
        }
    }
    b.edge("end", "stay", q(0, 1), "end");
    b.tail(TailKind::Zero);
    b.build().expect("valid by construction")
}

/// Explicit columns `1..=depth` with entries in multiples of 1/4 up to
/// `t = depth`, zero afterwards; `d^k_k >= 1/4` keeps every column alive.
/// Later columns repeat the last one.
pub fn random_zero_tail_matrix(rng: &mut ChaCha8Rng, depth: usize) -> DiscountMatrix<Rational> {
    let columns: Vec<Vec<Rational>> = (1..=depth)
        .map(|k| {
            (1..=depth)
                .map(|t| match t.cmp(&k) {
                    std::cmp::Ordering::Less => q(0, 1),
                    std::cmp::Ordering::Equal => q(rng.gen_range(1..=4), 4),
                    std::cmp::Ordering::Greater => q(rng.gen_range(0..=4), 4),
                })
                .collect()
        })
        .collect();
    DiscountMatrix::from_rows(&columns, ColumnRule::RepeatLast).expect("well-formed")
}

/// A random environment and zero-tail matrix from one seed.
pub fn random_instance(seed: u64, shape: EnvShape) -> ZooInstance<Rational> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = random_env(&mut rng, shape);
    let matrix = random_zero_tail_matrix(&mut rng, shape.depth.max(1));
    ZooInstance { name: format!("random-{seed}"), env, matrix, seed: Some(seed) }
}

/// Positive base vector with entries in `[1/1000, 1]` over `1..=len`,
/// zero afterwards.
pub fn random_base(rng: &mut ChaCha8Rng, len: usize) -> DiscountVector<Rational> {
    DiscountVector::from_full(1, &(0..len).map(|_| q(rng.gen_range(1..=1000), 1000)).collect::<Vec<_>>())
}

/// Positive scale factors `α_1 = 1, α_2.., α_len` in `[1/10, 10]`.
pub fn random_alphas(rng: &mut ChaCha8Rng, len: usize) -> Vec<Rational> {
    (0..len).map(|k| if k == 0 { q(1, 1) } else { q(rng.gen_range(1..=100), 10) }).collect()
}

/// Explicit full columns `1..=size` of `m`, each over `t = 1..=size`.
pub fn materialise<S: Scalar>(m: &DiscountMatrix<S>, size: usize) -> Result<Vec<Vec<S>>> {
    (1..=size).map(|k| Ok(m.column(k)?.entries(size))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::validate_environment;

    #[test]
    fn named_instances_are_valid() {
        for inst in named_instances() {
            assert!(validate_environment(&inst.env).is_empty(), "{}", inst.name);
            assert!(inst.matrix.column(1).is_ok(), "{}", inst.name);
        }
    }

    #[test]
    fn random_instances_are_valid_and_reproducible() {
        for seed in 0..50 {
            let a = random_instance(seed, EnvShape::default());
            assert!(validate_environment(&a.env).is_empty());
            assert!(a.finite());
            let b = random_instance(seed, EnvShape::default());
            assert_eq!(a.env, b.env);
            assert_eq!(a.matrix, b.matrix);
        }
    }
}

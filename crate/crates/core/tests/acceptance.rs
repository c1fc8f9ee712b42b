//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use timecon::builtin::{three_step_game, three_step_matrix, zigzag};
use timecon::equilibrium::DEFAULT_BUDGET;
use timecon::scalar::format_sig;
use timecon::zoo::{materialise, named_instances, random_alphas, random_base, random_instance, EnvShape, ZooInstance};
use timecon::*;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<E: std::fmt::Debug>(err: E) -> String {
    format!("{err:?}")
}

fn within(start: Instant, limit: Duration) -> std::result::Result<(), String> {
    let spent = start.elapsed();
    ensure(spent <= limit, format!("took {spent:?}, limit {limit:?}"))
}

fn scripted(env: &Environment<Rational>, moves: &[&str]) -> Policy {
    let mut policy = Policy::new(1, moves.len(), TailRule::Death);
    let mut s = env.start();
    for (i, m) in moves.iter().enumerate() {
        let a = env.action_index(s, m).expect("known action");
        policy.set(i + 1, s, a);
        s = env.successors(s, a)[0].target;
    }
    policy
}

fn three_step_values() -> Check {
    let start = Instant::now();
    let env = three_step_game::<Rational>();
    let m = three_step_matrix::<Rational>();
    let root = HistoryNode::root(&env);
    let first = m.column(1).map_err(e)?;
    let zero = q(0, 1);
    let mut got = Vec::new();
    for (moves, expected) in [(&["down"][..], 8), (&["right", "down"][..], 5), (&["right", "right", "down"][..], 9)] {
        let v = value(&env, &scripted(&env, moves), &root, &first, &zero).map_err(e)?.value;
        ensure(v == q(expected, 1), format!("{moves:?} has value {v}, expected {expected}"))?;
        got.push(v.to_string());
    }
    let (_, best) = optimal_policy(&env, &first, &root, &zero).map_err(e)?;
    ensure(best.value == q(9, 1), format!("optimum {}", best.value))?;
    let rollout = mixed_policy_rollout(&env, &m, &root, 3, &zero).map_err(e)?;
    let mixed = value(&env, &rollout.policy, &root, &first, &zero).map_err(e)?.value;
    ensure(mixed == q(5, 1), format!("mixed utility {mixed}"))?;
    let spe = spe_backward_induction(&env, &m, 3, TieRule::LowestIndex).map_err(e)?;
    let root_action = spe.policy.action(1, env.start()).ok_or("no root action")?;
    ensure(env.action_name(env.start(), root_action) == "down", "equilibrium root action is not down")?;
    let spe_value = spe.player_value(1, env.start()).ok_or("no root value")?;
    ensure(*spe_value == q(8, 1), format!("equilibrium utility {spe_value}"))?;
    within(start, Duration::from_secs(1))?;
    Ok(format!("paths {}, optimum 9, mixed 5, equilibrium down/8", got.join("/")))
}

fn zigzag_equilibria() -> Check {
    let start = Instant::now();
    let env = zigzag::<Rational>(10).map_err(e)?;
    let m = DiscountMatrix::family(Family::ConstantHorizon { horizon: 2 }).map_err(e)?;
    let root = HistoryNode::root(&env);
    for horizon in [5, 6] {
        let found = enumerate_spe(&env, &m, horizon, DEFAULT_BUDGET).map_err(e)?;
        ensure(found.len() == 2, format!("T={horizon}: {} equilibria", found.len()))?;
        let mut seqs = Vec::new();
        for r in &found {
            let seq = expected_rewards(&env, &r.policy, &root, horizon).map_err(e)?.values().to_vec();
            seqs.push(seq);
        }
        seqs.sort();
        let mut a = vec![q(0, 1); horizon];
        a[1] = q(2, 3);
        let mut b = vec![q(0, 1); horizon];
        b[0] = q(1, 2);
        ensure(seqs == vec![a, b], format!("T={horizon}: reward sequences {seqs:?}"))?;
        let ours: BTreeSet<Policy> = found.into_iter().map(|r| r.policy).collect();
        let oracle = brute_force_spe_set(&env, &m, horizon, 100_000).map_err(e)?;
        ensure(ours == oracle, format!("T={horizon}: brute force finds {} equilibria", oracle.len()))?;
    }
    within(start, Duration::from_secs(1))?;
    Ok("2 equilibria [1/2,0,..] and [0,2/3,..] at T=5,6; brute force agrees".into())
}

fn zigzag_agents() -> Check {
    let env = zigzag::<Rational>(60).map_err(e)?;
    let root = HistoryNode::root(&env);
    let zero = q(0, 1);
    let h2 = DiscountMatrix::family(Family::ConstantHorizon { horizon: 2 }).map_err(e)?;
    let rollout = mixed_policy_rollout(&env, &h2, &root, 50, &zero).map_err(e)?;
    ensure(rollout.rewards.values().iter().all(|r| r.is_zero()), "constant-horizon agent collects a reward")?;

    let gamma = 0.9f64;
    let argmax = (0..=20usize)
        .map(|t| (t, gamma.powi(t as i32) * (t as f64 + 1.0) / (t as f64 + 2.0)))
        .fold((0, f64::MIN), |best, x| if x.1 > best.1 { x } else { best })
        .0;
    let env = zigzag::<Rational>(21).map_err(e)?;
    let root = HistoryNode::root(&env);
    let v = make_discount::<Rational>(&Family::Geometric { gamma: q(9, 10) }, 1).map_err(e)?;
    let (policy, _) = optimal_policy(&env, &v, &root, &zero).map_err(e)?;
    let trace = timecon::planning::realised_trace(&env, &policy, &root, 21).map_err(e)?;
    let up_time = trace
        .iter()
        .enumerate()
        .find(|(i, step)| {
            let s = if *i == 0 { env.start() } else { trace[i - 1].state };
            env.action_name(s, step.action) == "up"
        })
        .map(|(i, _)| i + 1)
        .ok_or("geometric agent never moves up")?;
    ensure(up_time - 1 == argmax, format!("first up at time {up_time}, formula argmax index {argmax}"))?;
    Ok(format!("H=2 earns 0 over 50 steps; gamma=0.9 moves up at index {argmax} as the formula predicts"))
}

/// Independent check of a reported violation: α_k anchored at the first
/// positive entry of column 1 at or after `k`.
fn genuine_witness(cols: &[Vec<Rational>], k: usize, t: usize) -> bool {
    let first = &cols[0];
    let anchor = match (k..=first.len()).find(|&i| !first[i - 1].is_zero()) {
        Some(i) => i,
        None => return !cols[k - 1][t - 1].is_zero(),
    };
    let alpha = cols[k - 1][anchor - 1].clone() / first[anchor - 1].clone();
    cols[k - 1][t - 1] != alpha * first[t - 1].clone()
}

fn characterisation() -> Check {
    let size = 50;
    let tol = Rational::from_f64(1e-9);
    let verdict = |m: &DiscountMatrix<Rational>| is_time_consistent(m, size, size, &tol).map_err(e);
    for (name, f) in [
        ("geometric", Family::Geometric { gamma: q(9, 10) }),
        ("fixed-lifetime", Family::FixedLifetime { lifetime: 50 }),
    ] {
        let m = DiscountMatrix::family(f).map_err(e)?;
        ensure(verdict(&m)?.consistent, format!("{name} judged inconsistent"))?;
    }
    let h2 = DiscountMatrix::family(Family::ConstantHorizon { horizon: 2 }).map_err(e)?;
    let report = verdict(&h2)?;
    let (k, t) = report.witness.ok_or("constant horizon judged consistent")?;
    ensure(genuine_witness(&materialise(&h2, size).map_err(e)?, k, t), format!("bad witness ({k},{t})"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..100 {
        let base = random_base(&mut rng, size);
        let alphas = random_alphas(&mut rng, size);
        let m = make_consistent_matrix(base, Some(alphas)).map_err(e)?;
        ensure(verdict(&m)?.consistent, format!("consistent instance {i} judged inconsistent"))?;

        let mut cols = materialise(&m, size).map_err(e)?;
        let k = rng.gen_range(2..size);
        let t = rng.gen_range(k..=size);
        cols[k - 1][t - 1] = cols[k - 1][t - 1].clone() + q(rng.gen_range(1..=50), 1000);
        let perturbed = DiscountMatrix::from_rows(&cols, ColumnRule::None).map_err(e)?;
        let report = verdict(&perturbed)?;
        let (wk, wt) = report.witness.ok_or(format!("perturbed instance {i} judged consistent"))?;
        ensure(
            wk == k && genuine_witness(&cols, wk, wt),
            format!("instance {i}: witness ({wk},{wt}), perturbed ({k},{t})"),
        )?;
    }
    Ok("geometric, fixed-lifetime, 100 scaled: consistent; constant horizon, 100 perturbed: witnessed".into())
}

fn geometric_rate() -> Check {
    let size = 10;
    let mut recovered = Vec::new();
    for gamma in [0.1f64, 0.5, 0.9, 0.99] {
        let cols: Vec<Vec<f64>> = (1..=size)
            .map(|k| (1..=size).map(|t| if t < k { 0.0 } else { gamma.powi((t - k) as i32) }).collect())
            .collect();
        let m = DiscountMatrix::from_rows(&cols, ColumnRule::None).map_err(e)?;
        let rate = infer_geometric_rate(&m, size, &1e-9).map_err(e)?.ok_or(format!("no rate for {gamma}"))?;
        ensure((rate.gamma - gamma).abs() <= 1e-9, format!("recovered {} for {gamma}", rate.gamma))?;
        recovered.push(format_sig(rate.gamma, 10));
    }
    Ok(format!("recovered {}", recovered.join(", ")))
}

fn bound_holds(inst: &ZooInstance<Rational>) -> std::result::Result<(), String> {
    let (tol, epsilon) = if inst.finite() || inst.matrix.column(1).map_err(e)?.support() != Support::Unbounded {
        (q(0, 1), q(0, 1))
    } else {
        (Rational::from_f64(1e-9), q(1, 100))
    };
    let report =
        regret_with_bound(&inst.env, &inst.matrix, &epsilon, &tol).map_err(|err| format!("{}: {err}", inst.name))?;
    let bound = report.bound.clone().expect("bound requested");
    let slack = Rational::from_f64(2e-9);
    ensure(
        report.regret <= bound.clone() + slack,
        format!("{}: regret {} exceeds bound {}", inst.name, report.regret, bound),
    )
}

fn continuity() -> Check {
    let start = Instant::now();
    for inst in named_instances() {
        bound_holds(&inst)?;
    }
    let seeds = 0..1000u64;
    let mut failing = Vec::new();
    for seed in seeds.clone() {
        if let Err(msg) = bound_holds(&random_instance(seed, EnvShape::default())) {
            failing.push(msg);
        }
    }
    ensure(failing.is_empty(), failing.join("; "))?;
    within(start, Duration::from_secs(60))?;
    Ok(format!(
        "{} named and 1000 random instances (seeds {seeds:?}) in {:?}",
        named_instances().len(),
        start.elapsed()
    ))
}

fn lower_bound() -> Check {
    let r = tightness_experiment(&q(1, 10), 5, &q(1, 100), &q(0, 1)).map_err(e)?;
    let regret = &r.regret.regret;
    ensure(*regret == r.closed_form, format!("regret {regret} differs from closed form {}", r.closed_form))?;
    let printed = format!("{:.10}", regret.to_f64());
    ensure(printed == "0.2960000010", format!("regret prints as {printed}"))?;
    ensure(r.upper_holds && r.upper == q(6, 10), "upper inequality fails")?;
    ensure(!r.lower_holds && r.stated_lower == q(297, 1000), "strict lower inequality unexpectedly holds")?;
    let adjacent = &r.bound_terms.adjacent;
    ensure(
        adjacent.len() >= 3 && adjacent[..3].iter().all(|d| *d == q(1, 10)),
        format!("adjacent distances {adjacent:?}"),
    )?;
    Ok(format!("regret {printed} < 0.6; lower inequality 0.297 flagged as violated; bound {}", r.bound))
}

fn oracle_agreement() -> Check {
    let budget = 100_000u128;
    let zero = q(0, 1);
    let mut instances = named_instances();
    instances.extend((0..150).map(|s| random_instance(10_000 + s, EnvShape::default())));
    let (mut planner_checks, mut spe_checks, mut skipped) = (0, 0, 0);
    for inst in &instances {
        let (env, m) = (&inst.env, &inst.matrix);
        let root = HistoryNode::root(env);
        for k in 1..=3 {
            let Ok(v) = m.column(k) else { continue };
            let Ok((_, report)) = optimal_policy(env, &v, &root, &zero) else { continue };
            match brute_force_optimal(env, &v, report.horizon_used.max(1), budget) {
                Ok((_, best)) => {
                    ensure(
                        best == report.value,
                        format!("{} column {k}: planner {} vs brute force {best}", inst.name, report.value),
                    )?;
                    planner_checks += 1;
                }
                Err(Error::BudgetExceeded { .. }) => skipped += 1,
                Err(err) => return Err(format!("{}: {err}", inst.name)),
            }
        }
        let horizon = match last_reward_time(env) {
            Some(t) => t.clamp(1, 8),
            None => 3,
        };
        let Ok(found) = enumerate_spe(env, m, horizon, budget) else { continue };
        match brute_force_spe_set(env, m, horizon, budget) {
            Ok(oracle) => {
                let ours: BTreeSet<Policy> = found.into_iter().map(|r| r.policy).collect();
                ensure(
                    ours == oracle,
                    format!("{}: {} equilibria vs {} by brute force", inst.name, ours.len(), oracle.len()),
                )?;
                spe_checks += 1;
            }
            Err(Error::BudgetExceeded { .. }) => skipped += 1,
            Err(err) => return Err(format!("{}: {err}", inst.name)),
        }
    }
    Ok(format!("{planner_checks} optimal values and {spe_checks} equilibrium sets match; {skipped} over budget"))
}

fn last_reward_time(env: &Environment<Rational>) -> Option<usize> {
    timecon::planning::last_reward_time(env, 1, &[env.start()])
}

fn non_expectimax() -> Check {
    let r = check_non_expectimax(500, 7).map_err(e)?;
    ensure(r.spe_differs, "equilibrium acts the same in both sub-games")?;
    ensure(r.monotone_samples == 500 && r.grid_points == 99, "wrong sample counts")?;
    ensure(r.holds(), format!("{} counterexamples, {} matching", r.counterexamples.len(), r.matching_spe))?;
    Ok(format!(
        "{} sampled + {} grid vectors act identically in both sub-games; 0 counterexamples",
        r.monotone_samples, r.grid_points
    ))
}

fn pipeline_digest(inst: &ZooInstance<Rational>) -> String {
    let root = HistoryNode::root(&inst.env);
    let tol = Rational::from_f64(1e-9);
    let regret = regret(&inst.env, &inst.matrix, &tol);
    let rollout = mixed_policy_rollout(&inst.env, &inst.matrix, &root, 6, &tol);
    let spe = spe_backward_induction(&inst.env, &inst.matrix, 4, TieRule::RecordAll);
    format!("{regret:?}{rollout:?}{spe:?}")
}

fn state_paths(env: &Environment<Rational>, policy: &Policy, root: &HistoryNode<Rational>, depth: usize) -> Rational {
    let mut total = q(0, 1);
    let mut stack = vec![vec![root.state]];
    while let Some(path) = stack.pop() {
        if path.len() == depth + 1 {
            total = total + path_probability(env, root, policy, &path).expect("defined policy");
            continue;
        }
        let s = *path.last().unwrap();
        let next: BTreeSet<StateId> =
            (0..env.num_actions(s)).flat_map(|a| env.successors(s, a).iter().map(|tr| tr.target)).collect();
        for n in next {
            let mut p = path.clone();
            p.push(n);
            stack.push(p);
        }
    }
    total
}

fn invariants() -> Check {
    let mut instances = named_instances();
    instances.extend((0..100).map(|s| random_instance(20_000 + s, EnvShape::default())));
    let horizon = 8;
    for inst in &instances {
        let (env, m) = (&inst.env, &inst.matrix);
        let root = HistoryNode::root(env);
        let name = &inst.name;
        let first = m.column(1).map_err(e)?;
        let truncate = |v: &DiscountVector<Rational>| DiscountVector::from_full(v.age(), &v.entries(horizon));
        let d1 = truncate(&first);
        let zero = q(0, 1);

        let (policy, base) = optimal_policy(env, &d1, &root, &zero).map_err(e)?;
        for alpha in [q(1, 2), q(2, 1), q(10, 1)] {
            let (scaled_policy, scaled) = optimal_policy(env, &d1.scaled(&alpha), &root, &zero).map_err(e)?;
            ensure(scaled_policy == policy, format!("{name}: argmax changes under scaling by {alpha}"))?;
            ensure(
                scaled.value == alpha.clone() * base.value.clone(),
                format!("{name}: value does not scale by {alpha}"),
            )?;
        }

        if let Ok(second) = m.column(2) {
            let d2 = DiscountVector::from_full(1, &second.entries(horizon));
            let (a, b) = (q(1, 3), q(5, 2));
            let mix: Vec<Rational> = d1
                .entries(horizon)
                .iter()
                .zip(d2.entries(horizon))
                .map(|(x, y)| a.clone() * x.clone() + b.clone() * y)
                .collect();
            let mixed = DiscountVector::from_full(1, &mix);
            let v = |d: &DiscountVector<Rational>| value(env, &policy, &root, d, &zero).map(|r| r.value);
            let lhs = v(&mixed).map_err(e)?;
            let rhs = a * v(&d1).map_err(e)? + b * v(&d2).map_err(e)?;
            ensure(lhs == rhs, format!("{name}: value is not linear in the discount vector"))?;
        }

        let full = Policy::from_fn(&Lattice::build(env, 1, env.start(), 5), TailRule::Death, |_, _| 0);
        ensure(state_paths(env, &full, &root, 5) == q(1, 1), format!("{name}: path probabilities do not sum to 1"))?;

        ensure(pipeline_digest(inst) == pipeline_digest(inst), format!("{name}: repeated runs differ"))?;
    }
    let a = serde_json::to_string(&check_non_expectimax(50, 3).map_err(e)?).map_err(e)?;
    let b = serde_json::to_string(&check_non_expectimax(50, 3).map_err(e)?).map_err(e)?;
    ensure(a == b, "sampled report is not reproducible")?;
    Ok(format!("scaling, linearity, normalisation and determinism on {} instances", instances.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("three-step game values, mixed utility and equilibrium", three_step_values),
        ("zig-zag equilibria under constant horizon 2", zigzag_equilibria),
        ("zig-zag agents: constant horizon and geometric", zigzag_agents),
        ("time-consistency characterisation", characterisation),
        ("geometric rate from sliding consistent matrices", geometric_rate),
        ("regret within the continuity bound", continuity),
        ("lower-bound chain regret", lower_bound),
        ("planner and equilibria agree with brute force", oracle_agreement),
        ("equilibrium that no single discount vector reproduces", non_expectimax),
        ("invariant suite on the instance zoo", invariants),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS {:>2}  {name}: {detail} [{ms} ms]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2}  {name}: {detail} [{ms} ms]", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

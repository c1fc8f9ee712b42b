//! Reference values for the worked examples, recomputed and compared.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;
use serde_json::json;
use timecon::builtin::{three_step_game, three_step_matrix, zigzag};
use timecon::planning::realised_trace;
use timecon::scalar::format_sig;
use timecon::*;

use crate::commands::Outcome;
use crate::output::table;

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    /// Use this environment file in place of the built-in three-step game.
    #[arg(long)]
    pub three_step_env: Option<PathBuf>,
}

#[derive(Serialize)]
struct CheckResult {
    name: &'static str,
    expected: String,
    got: String,
    pass: bool,
}

type Found = Result<String>;

fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

fn scripted(env: &Environment<Rational>, moves: &[&str]) -> Result<Policy> {
    let mut policy = Policy::new(1, moves.len(), TailRule::Death);
    let mut s = env.start();
    for (i, m) in moves.iter().enumerate() {
        let a = env.action_index(s, m).with_context(|| format!("no action '{m}' at {}", env.state_name(s)))?;
        policy.set(i + 1, s, a);
        s = env.successors(s, a)[0].target;
    }
    Ok(policy)
}

fn three_step_checks(env: &Environment<Rational>) -> Vec<(&'static str, String, Found)> {
    let m = three_step_matrix::<Rational>();
    let root = HistoryNode::root(env);
    let zero = q(0, 1);
    let path_value = |moves: &[&str]| -> Found {
        let v = m.column(1)?;
        Ok(value(env, &scripted(env, moves)?, &root, &v, &zero)?.value.to_string())
    };
    vec![
        ("three-step: value of down", "8".into(), path_value(&["down"])),
        ("three-step: value of right, down", "5".into(), path_value(&["right", "down"])),
        ("three-step: value of right, right, down", "9".into(), path_value(&["right", "right", "down"])),
        (
            "three-step: optimum under column 1",
            "9".into(),
            (|| Ok(optimal_policy(env, &m.column(1)?, &root, &zero)?.1.value.to_string()))(),
        ),
        (
            "three-step: mixed-policy utility",
            "5".into(),
            (|| {
                let run = mixed_policy_rollout(env, &m, &root, 3, &zero)?;
                Ok(value(env, &run.policy, &root, &m.column(1)?, &zero)?.value.to_string())
            })(),
        ),
        (
            "three-step: equilibrium root action",
            "down".into(),
            (|| {
                let spe = spe_backward_induction(env, &m, 3, TieRule::LowestIndex)?;
                let a = spe.policy.action(1, env.start()).context("no root action")?;
                Ok(env.action_name(env.start(), a).to_string())
            })(),
        ),
        (
            "three-step: equilibrium utility",
            "8".into(),
            (|| {
                let spe = spe_backward_induction(env, &m, 3, TieRule::LowestIndex)?;
                Ok(spe.player_value(1, env.start()).context("no root value")?.to_string())
            })(),
        ),
    ]
}

fn zigzag_checks() -> Vec<(&'static str, String, Found)> {
    let zero = q(0, 1);
    let h2 = || DiscountMatrix::family(Family::ConstantHorizon { horizon: 2 });
    let argmax = (0..=20usize)
        .map(|t| (t, 0.9f64.powi(t as i32) * (t as f64 + 1.0) / (t as f64 + 2.0)))
        .fold((0, f64::MIN), |best, x| if x.1 > best.1 { x } else { best })
        .0;
    vec![
        (
            "zigzag: constant horizon 2 earns nothing over 50 steps",
            "0".into(),
            (|| {
                let env = zigzag::<Rational>(60)?;
                let run = mixed_policy_rollout(&env, &h2()?, &HistoryNode::root(&env), 50, &zero)?;
                Ok(run.rewards.values().iter().fold(q(0, 1), |a, r| a + r.clone()).to_string())
            })(),
        ),
        (
            "zigzag: equilibria under constant horizon 2",
            "2".into(),
            (|| {
                let env = zigzag::<Rational>(10)?;
                Ok(enumerate_spe(&env, &h2()?, 6, 100_000)?.len().to_string())
            })(),
        ),
        (
            "zigzag: equilibrium reward sequences",
            "[0, 2/3, 0] [1/2, 0, 0]".into(),
            (|| {
                let env = zigzag::<Rational>(10)?;
                let root = HistoryNode::root(&env);
                let mut seqs = enumerate_spe(&env, &h2()?, 6, 100_000)?
                    .iter()
                    .map(|r| {
                        let v = expected_rewards(&env, &r.policy, &root, 3)?;
                        let parts: Vec<String> = v.values().iter().map(|x| x.to_string()).collect();
                        Ok(format!("[{}]", parts.join(", ")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                seqs.sort();
                Ok(seqs.join(" "))
            })(),
        ),
        (
            "zigzag: first mover's value of its preferred equilibrium",
            "2/3".into(),
            (|| {
                let env = zigzag::<Rational>(10)?;
                let best = enumerate_spe(&env, &h2()?, 6, 100_000)?
                    .iter()
                    .filter_map(|r| r.player_value(1, env.start()).cloned())
                    .fold(q(0, 1), |a, b| if b > a { b } else { a });
                Ok(best.to_string())
            })(),
        ),
        (
            "zigzag: geometric 0.9 first moves up at index",
            argmax.to_string(),
            (|| {
                let env = zigzag::<Rational>(21)?;
                let root = HistoryNode::root(&env);
                let v = make_discount::<Rational>(&Family::Geometric { gamma: q(9, 10) }, 1)?;
                let (policy, _) = optimal_policy(&env, &v, &root, &zero)?;
                let trace = realised_trace(&env, &policy, &root, 21)?;
                let mut s = env.start();
                for (i, step) in trace.iter().enumerate() {
                    if env.action_name(s, step.action) == "up" {
                        return Ok(i.to_string());
                    }
                    s = step.state;
                }
                Ok("never".into())
            })(),
        ),
    ]
}

fn discount_checks() -> Vec<(&'static str, String, Found)> {
    let tol = Rational::from_f64(1e-9);
    vec![
        (
            "geometric 0.9: time-consistent with alpha = 1",
            "consistent, alpha 1".into(),
            (|| {
                let m = DiscountMatrix::family(Family::Geometric { gamma: q(9, 10) })?;
                let r = is_time_consistent(&m, 50, 50, &tol)?;
                let unit = r.alphas.iter().all(|a| a.is_one());
                Ok(format!(
                    "{}, alpha {}",
                    if r.consistent { "consistent" } else { "inconsistent" },
                    if unit { "1" } else { "varies" }
                ))
            })(),
        ),
        (
            "constant horizon 2: inconsistent, witness",
            "(2, 3)".into(),
            (|| {
                let m = DiscountMatrix::family(Family::ConstantHorizon { horizon: 2 })?;
                Ok(match is_time_consistent(&m, 50, 50, &tol)?.witness {
                    Some((k, t)) => format!("({k}, {t})"),
                    None => "consistent".into(),
                })
            })(),
        ),
        (
            "sliding geometric 0.9: recovered rate",
            "0.9".into(),
            (|| {
                let m = DiscountMatrix::family(Family::SlidingGeometric { gamma: q(9, 10) })?;
                Ok(match infer_geometric_rate(&m, 30, &tol)? {
                    Some(r) => format_sig(r.gamma.to_f64(), 10),
                    None => "none".into(),
                })
            })(),
        ),
    ]
}

fn regret_checks() -> Vec<(&'static str, String, Found)> {
    let run = || tightness_experiment(&q(1, 10), 5, &q(1, 100), &q(0, 1));
    vec![
        (
            "lower-bound chain: regret",
            "0.2960000010".into(),
            (|| Ok(format!("{:.10}", run()?.regret.regret.to_f64())))(),
        ),
        ("lower-bound chain: regret below (t+1) delta", "true".into(), (|| Ok(run()?.upper_holds.to_string()))()),
        (
            "lower-bound chain: adjacent distances",
            "1/10 1/10 1/10".into(),
            (|| {
                let r = run()?;
                Ok(r.bound_terms.adjacent.iter().take(3).map(|d| d.to_string()).collect::<Vec<_>>().join(" "))
            })(),
        ),
        (
            "split game: equilibrium matches no expectimax policy",
            "true".into(),
            (|| Ok(check_non_expectimax(500, 7)?.holds().to_string()))(),
        ),
    ]
}

pub fn reproduce(args: &ReproduceArgs) -> Result<Outcome> {
    let env = match &args.three_step_env {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            load_environment(&text)?
        }
        None => three_step_game(),
    };
    let mut checks = three_step_checks(&env);
    checks.extend(zigzag_checks());
    checks.extend(discount_checks());
    checks.extend(regret_checks());
    let results: Vec<CheckResult> = checks
        .into_iter()
        .map(|(name, expected, found)| {
            let got = found.unwrap_or_else(|e| format!("error: {e}"));
            CheckResult { pass: got == expected, name, expected, got }
        })
        .collect();
    let failed = results.iter().filter(|r| !r.pass).count();
    let cells: Vec<Vec<String>> = results
        .iter()
        .map(|r| vec![if r.pass { "ok" } else { "FAIL" }.into(), r.name.into(), r.expected.clone(), r.got.clone()])
        .collect();
    let text = format!(
        "{}\n\n{} of {} checks pass\n",
        table(&["", "check", "expected", "got"], &cells),
        results.len() - failed,
        results.len()
    );
    let json = json!({ "command": "reproduce", "checks": results, "failed": failed });
    Ok(Outcome { text, json, code: if failed == 0 { 0 } else { 1 } })
}

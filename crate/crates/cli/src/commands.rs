use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use timecon::planning::last_reward_time;
use timecon::*;

use crate::output::{num, nums, on_path, policy_rows_or_trace, policy_table, rows_json, show, table};
use crate::scenario::{parse_number, DiscountSource, EnvSource};

/// What a command produced: a human-readable report, the same content as
/// JSON, and the exit code.
pub struct Outcome {
    pub text: String,
    pub json: Value,
    pub code: i32,
}

impl Outcome {
    fn ok(text: String, json: Value) -> Self {
        Outcome { text, json, code: 0 }
    }
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Truncation tolerance for infinite-support columns; 0 demands exact horizons.
    #[arg(long, default_value = "1e-9")]
    pub tol: String,
    /// Enumeration budget for brute-force and equilibrium enumeration.
    #[arg(long, default_value_t = 100_000)]
    pub budget: u128,
}

impl Common {
    fn tol(&self) -> Result<Rational> {
        let tol = parse_number(&self.tol)?;
        if tol < Rational::zero() {
            bail!("tolerance must be nonnegative");
        }
        Ok(tol)
    }
}

fn env_horizon(env: &Environment<Rational>, fallback: usize) -> usize {
    last_reward_time(env, 1, &[env.start()]).unwrap_or(fallback).max(1)
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[command(flatten)]
    pub env: EnvSource,
    #[command(flatten)]
    pub discount: DiscountSource,
    #[command(flatten)]
    pub common: Common,
    /// Plan with column k of the matrix.
    #[arg(long, default_value_t = 1)]
    pub column: usize,
    /// Cross-check the value against exhaustive policy enumeration.
    #[arg(long)]
    pub oracle: bool,
}

pub fn plan(args: &PlanArgs) -> Result<Outcome> {
    let env = args.env.resolve()?;
    let m = args.discount.resolve()?;
    let v = m.column(args.column)?;
    let root = HistoryNode::root(&env);
    let (policy, report) = optimal_policy(&env, &v, &root, &args.common.tol()?)?;
    let horizon = report.horizon_used.max(1);
    let rows = on_path(&env, &policy, horizon);
    let rewards = expected_rewards(&env, &policy, &root, horizon)?;
    let mut text = format!(
        "optimal value under column {}: {}\nhorizon used: {}\ntruncation bound: {}\n\n{}\n",
        args.column,
        show(&report.value),
        report.horizon_used,
        show(&report.truncation_error_bound),
        policy_table(&rows)
    );
    let mut json = json!({
        "command": "plan",
        "column": args.column,
        "value": num(&report.value),
        "horizon_used": report.horizon_used,
        "truncation_bound": num(&report.truncation_error_bound),
        "policy": rows_json(&rows),
        "expected_rewards": nums(rewards.values()),
    });
    let mut code = 0;
    if args.oracle {
        let (_, best) = brute_force_optimal(&env, &v, horizon, args.common.budget)?;
        let agrees = best == report.value;
        text.push_str(&format!(
            "\noracle: exhaustive maximum {} ({})\n",
            show(&best),
            if agrees { "agrees" } else { "DIFFERS" }
        ));
        json["oracle"] = json!({ "value": num(&best), "agrees": agrees });
        if !agrees {
            code = 1;
        }
    }
    Ok(Outcome { text, json, code })
}

#[derive(Args, Debug)]
pub struct ConsistencyArgs {
    #[command(flatten)]
    pub discount: DiscountSource,
    /// Number of columns to check.
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    /// Last time index to check.
    #[arg(long, default_value_t = 50)]
    pub t: usize,
    /// Relative tolerance of the ratio test.
    #[arg(long, default_value = "1e-9")]
    pub tol: String,
}

pub fn consistency(args: &ConsistencyArgs) -> Result<Outcome> {
    let m = args.discount.resolve()?;
    let tol = parse_number(&args.tol)?;
    let report = is_time_consistent(&m, args.k, args.t, &tol)?;
    let sliding = is_sliding(&m, args.k, args.t, &tol)?;
    let rate = if sliding && report.consistent { infer_geometric_rate(&m, args.t, &tol)? } else { None };
    let mut text = format!(
        "window: k <= {}, t <= {}\ntime-consistent: {}\nsliding: {}\n",
        args.k,
        args.t,
        if report.consistent { "yes" } else { "no" },
        if sliding { "yes" } else { "no" },
    );
    if report.consistent {
        let shown: Vec<String> = report.alphas.iter().take(8).map(show).collect();
        let more = if report.alphas.len() > 8 { ", ..." } else { "" };
        text.push_str(&format!("alpha_1..: {}{more}\n", shown.join(", ")));
    }
    let mut json = json!({
        "command": "consistency",
        "window": { "k": args.k, "t": args.t },
        "consistent": report.consistent,
        "sliding": sliding,
        "alphas": nums(&report.alphas),
        "witness": Value::Null,
        "geometric_rate": Value::Null,
    });
    if let Some((k, t)) = report.witness {
        let (d1, dk) = (m.entry(1, t)?, m.entry(k, t)?);
        text.push_str(&format!(
            "witness: column {k} at t = {t}: d^{k}_{t} = {}, alpha_{k} d^1_{t} = {}\n",
            show(&dk),
            show(&(report.alphas[k - 1].clone() * d1.clone()))
        ));
        json["witness"] = json!({ "k": k, "t": t, "d1": num(&d1), "dk": num(&dk) });
    }
    if let Some(rate) = rate {
        text.push_str(&format!(
            "geometric rate: {}{}\n",
            show(&rate.gamma),
            if rate.proper { "" } else { " (not in (0,1))" }
        ));
        json["geometric_rate"] = json!({ "gamma": num(&rate.gamma), "proper": rate.proper });
    }
    Ok(Outcome::ok(text, json))
}

#[derive(Args, Debug)]
pub struct RolloutArgs {
    #[command(flatten)]
    pub env: EnvSource,
    #[command(flatten)]
    pub discount: DiscountSource,
    #[command(flatten)]
    pub common: Common,
    /// Steps to roll out; defaults to the last rewarding time, or 20.
    #[arg(long)]
    pub horizon: Option<usize>,
}

pub fn rollout(args: &RolloutArgs) -> Result<Outcome> {
    let env = args.env.resolve()?;
    let m = args.discount.resolve()?;
    let tol = args.common.tol()?;
    let horizon = args.horizon.unwrap_or_else(|| env_horizon(&env, 20));
    let root = HistoryNode::root(&env);
    let run = mixed_policy_rollout(&env, &m, &root, horizon, &tol)?;
    let first = m.column(1)?;
    let utility = value(&env, &run.policy, &root, &first, &tol)?;
    let total = run.rewards.values().iter().fold(Rational::zero(), |acc, r| acc + r.clone());
    let steps = policy_rows_or_trace(&env, &run, horizon);
    let text = format!(
        "mixed policy over {horizon} steps\n\n{}\n\nundiscounted total: {}\nutility under column 1: {}\n",
        table(&["t", "state", "action", "expected reward"], &steps),
        show(&total),
        show(&utility.value)
    );
    let json = json!({
        "command": "rollout",
        "horizon": horizon,
        "steps": steps,
        "expected_rewards": nums(run.rewards.values()),
        "total": num(&total),
        "utility_first_column": num(&utility.value),
    });
    Ok(Outcome::ok(text, json))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Tie {
    /// Lowest-index maximiser, with every tie logged.
    Lowest,
    /// Enumerate every equilibrium.
    Enumerate,
}

#[derive(Args, Debug)]
pub struct SpeArgs {
    #[command(flatten)]
    pub env: EnvSource,
    #[command(flatten)]
    pub discount: DiscountSource,
    #[command(flatten)]
    pub common: Common,
    /// Number of players T; defaults to the last rewarding time, or 10.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_enum, default_value_t = Tie::Lowest)]
    pub tie: Tie,
    /// Same as `--tie enumerate`.
    #[arg(long)]
    pub enumerate: bool,
    /// Cross-check the equilibrium set against literal deviation checks.
    #[arg(long)]
    pub oracle: bool,
    /// Table of equilibrium changes for T = 1..tmax.
    #[arg(long)]
    pub convergence: bool,
    #[arg(long, default_value_t = 8)]
    pub tmax: usize,
    /// Sample discount vectors on the split game instead.
    #[arg(long)]
    pub split_report: bool,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

pub fn spe(args: &SpeArgs) -> Result<Outcome> {
    if args.split_report {
        return split_report(args.samples, args.seed);
    }
    let env = args.env.resolve()?;
    let m = args.discount.resolve()?;
    if args.convergence {
        return convergence(&env, &m, args.tmax);
    }
    let horizon = args.horizon.unwrap_or_else(|| env_horizon(&env, 10));
    let start = env.start();
    let enumerate = args.enumerate || args.tie == Tie::Enumerate;
    let results = if enumerate {
        enumerate_spe(&env, &m, horizon, args.common.budget)?
    } else {
        vec![spe_backward_induction(&env, &m, horizon, TieRule::RecordAll)?]
    };
    let root = HistoryNode::root(&env);
    let mut text =
        format!("players 1..={horizon}; {} equilibri{}\n", results.len(), if results.len() == 1 { "um" } else { "a" });
    let mut listed = Vec::new();
    let mut best: Option<(usize, Rational)> = None;
    for (i, r) in results.iter().enumerate() {
        let rows = on_path(&env, &r.policy, horizon);
        let rewards = expected_rewards(&env, &r.policy, &root, horizon)?;
        let first_value = r.player_value(1, start).cloned().unwrap_or_else(Rational::zero);
        if best.as_ref().is_none_or(|(_, b)| first_value > *b) {
            best = Some((i + 1, first_value.clone()));
        }
        let path: Vec<String> = rows.iter().map(|row| format!("{}:{}", row.state, row.action)).collect();
        let seq: Vec<String> = rewards.values().iter().map(show).collect();
        text.push_str(&format!(
            "\n#{}  path {}\n    expected rewards [{}]\n    value to player 1: {}\n",
            i + 1,
            path.join(" "),
            seq.join(", "),
            show(&first_value)
        ));
        if !r.tie_log.is_empty() {
            text.push_str(&format!("    ties at {} nodes\n", r.tie_log.len()));
        }
        if !r.tail_slack.is_zero() {
            text.push_str(&format!("    tail slack {}\n", show(&r.tail_slack)));
        }
        listed.push(json!({
            "policy": rows_json(&rows),
            "expected_rewards": nums(rewards.values()),
            "player_one_value": num(&first_value),
            "ties": r.tie_log,
            "tail_slack": num(&r.tail_slack),
        }));
    }
    let mut json = json!({ "command": "spe", "horizon": horizon, "equilibria": listed });
    if let (Some((index, v)), true) = (&best, results.len() > 1) {
        text.push_str(&format!("\nplayer 1 prefers equilibrium #{index} (value {})\n", show(v)));
        json["player_one_prefers"] = json!(index);
    }
    let mut code = 0;
    if args.oracle {
        let oracle = brute_force_spe_set(&env, &m, horizon, args.common.budget)?;
        let ours: std::collections::BTreeSet<Policy> = results.iter().map(|r| r.policy.clone()).collect();
        let agrees = if enumerate { ours == oracle } else { ours.is_subset(&oracle) };
        text.push_str(&format!(
            "\noracle: {} equilibria by literal deviation checks ({})\n",
            oracle.len(),
            if agrees { "agrees" } else { "DIFFERS" }
        ));
        json["oracle"] = json!({ "count": oracle.len(), "agrees": agrees });
        if !agrees {
            code = 1;
        }
    }
    Ok(Outcome { text, json, code })
}

fn convergence(env: &Environment<Rational>, m: &DiscountMatrix<Rational>, tmax: usize) -> Result<Outcome> {
    let rows = spe_convergence(env, m, tmax)?;
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.horizon.to_string(),
                r.first_difference.map_or("-".into(), |t| t.to_string()),
                timecon::scalar::format_sig(r.distance, 10),
            ]
        })
        .collect();
    let text = format!("{}\n", table(&["T", "first difference", "distance to T-1"], &cells));
    let json = json!({
        "command": "spe-convergence",
        "rows": rows.iter().map(|r| json!({
            "horizon": r.horizon,
            "first_difference": r.first_difference,
            "distance": timecon::scalar::format_sig(r.distance, 10),
        })).collect::<Vec<_>>(),
    });
    Ok(Outcome::ok(text, json))
}

fn split_report(samples: usize, seed: u64) -> Result<Outcome> {
    let r = check_non_expectimax(samples, seed)?;
    let text = format!(
        "equilibrium path in A: {}\nequilibrium path in B: {}\nacts differently: {}\n\
         nonincreasing samples {} + grid {}: {} act identically, {} match the equilibrium, {} counterexamples\n\
         unrestricted samples {}: {} act differently, {} match the equilibrium\nholds: {}\n",
        r.spe_path_a.join(" "),
        r.spe_path_b.join(" "),
        r.spe_differs,
        r.monotone_samples,
        r.grid_points,
        r.acting_identically,
        r.matching_spe,
        r.counterexamples.len(),
        r.unrestricted_samples,
        r.unrestricted_acting_differently,
        r.unrestricted_matching_spe,
        r.holds()
    );
    let mut json = serde_json::to_value(&r)?;
    json["command"] = json!("spe-split-report");
    json["holds"] = json!(r.holds());
    Ok(Outcome { code: if r.holds() { 0 } else { 1 }, text, json })
}

#[derive(Args, Debug)]
pub struct RegretArgs {
    #[command(flatten)]
    pub env: EnvSource,
    #[command(flatten)]
    pub discount: DiscountSource,
    #[command(flatten)]
    pub common: Common,
    /// Remaining-value threshold that fixes the cut time.
    #[arg(long, default_value = "0")]
    pub epsilon: String,
    /// Chain instance: DELTA T EPSILON.
    #[arg(long, num_args = 3, value_names = ["DELTA", "T", "EPSILON"])]
    pub lower_bound: Option<Vec<String>>,
    /// Range of chain lengths, e.g. `t=3..10` (needs --lower-bound for delta and epsilon).
    #[arg(long)]
    pub sweep: Option<String>,
    /// Write one CSV row per instance.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct SweepRow {
    t: usize,
    delta: String,
    epsilon: String,
    regret: String,
    closed_form: String,
    stated_lower: String,
    upper: String,
    bound: String,
    lower_holds: bool,
    upper_holds: bool,
}

fn terms_json(terms: &BoundTerms<Rational>) -> Value {
    json!({
        "epsilon": num(&terms.epsilon),
        "cut": terms.cut,
        "first_to_cut": num(&terms.first_to_cut),
        "adjacent": nums(&terms.adjacent),
        "reward_scale": num(&terms.reward_scale),
    })
}

fn terms_text(terms: &BoundTerms<Rational>) -> String {
    let adjacent: Vec<String> = terms.adjacent.iter().map(show).collect();
    format!(
        "cut time: {}\nD(1, cut): {}\nD(k, k+1): [{}]\nreward scale: {}\n",
        terms.cut,
        show(&terms.first_to_cut),
        adjacent.join(", "),
        show(&terms.reward_scale)
    )
}

fn parse_range(spec: &str) -> Result<std::ops::RangeInclusive<usize>> {
    let body = spec.strip_prefix("t=").unwrap_or(spec);
    let (a, b) = body.split_once("..").context("sweep range looks like t=3..10")?;
    let (a, b): (usize, usize) = (a.trim().parse()?, b.trim_start_matches('=').trim().parse()?);
    if a > b {
        bail!("empty sweep range {spec}");
    }
    Ok(a..=b)
}

pub fn regret_cmd(args: &RegretArgs) -> Result<Outcome> {
    let tol = args.common.tol()?;
    if let Some(lb) = &args.lower_bound {
        let delta = parse_number(&lb[0])?;
        let t: usize = lb[1].parse().with_context(|| format!("chain length '{}'", lb[1]))?;
        let eps = parse_number(&lb[2])?;
        if let Some(spec) = &args.sweep {
            return sweep(&delta, &eps, parse_range(spec)?, args.csv.as_ref());
        }
        let r = tightness_experiment(&delta, t, &eps, &Rational::zero())?;
        let text = format!(
            "chain instance: delta = {}, t = {t}, epsilon = {}\n\
             optimal value: {}\nmixed value: {}\nregret: {}\nclosed form (t-1)d(1-e) - (1-e^(t-1))d: {}\n\
             upper (t+1)d: {} holds: {}\nstated strict lower (t-2)(1-e)d: {} holds: {}\ncontinuity bound (epsilon 0): {}\n{}",
            show(&delta),
            show(&eps),
            show(&r.regret.v_star),
            show(&r.regret.v_mixed),
            show(&r.regret.regret),
            show(&r.closed_form),
            show(&r.upper),
            r.upper_holds,
            show(&r.stated_lower),
            r.lower_holds,
            show(&r.bound),
            terms_text(&r.bound_terms)
        );
        let json = json!({
            "command": "regret-lower-bound",
            "delta": num(&delta), "t": t, "epsilon": num(&eps),
            "v_star": num(&r.regret.v_star), "v_mixed": num(&r.regret.v_mixed),
            "regret": num(&r.regret.regret), "closed_form": num(&r.closed_form),
            "upper": num(&r.upper), "upper_holds": r.upper_holds,
            "stated_lower": num(&r.stated_lower), "lower_holds": r.lower_holds,
            "bound": num(&r.bound), "bound_terms": terms_json(&r.bound_terms),
        });
        return Ok(Outcome::ok(text, json));
    }
    if args.sweep.is_some() {
        bail!("--sweep needs --lower-bound DELTA T EPSILON for delta and epsilon");
    }
    let env = args.env.resolve()?;
    let m = args.discount.resolve()?;
    let eps = parse_number(&args.epsilon)?;
    let r = regret_with_bound(&env, &m, &eps, &tol)?;
    let (bound, terms) = (r.bound.clone().expect("requested"), r.bound_terms.clone().expect("requested"));
    let text = format!(
        "optimal value (column 1): {}\nmixed value: {}\nregret: {}\ntruncation slack: {}\ncontinuity bound: {}\n{}",
        show(&r.v_star),
        show(&r.v_mixed),
        show(&r.regret),
        show(&r.truncation_slack),
        show(&bound),
        terms_text(&terms)
    );
    let json = json!({
        "command": "regret",
        "v_star": num(&r.v_star), "v_mixed": num(&r.v_mixed), "regret": num(&r.regret),
        "truncation_slack": num(&r.truncation_slack), "bound": num(&bound), "bound_terms": terms_json(&terms),
    });
    Ok(Outcome::ok(text, json))
}

fn sweep(
    delta: &Rational,
    eps: &Rational,
    range: std::ops::RangeInclusive<usize>,
    csv_path: Option<&PathBuf>,
) -> Result<Outcome> {
    let ts: Vec<usize> = range.collect();
    let reports = ts
        .par_iter()
        .map(|&t| tightness_experiment(delta, t, eps, &Rational::zero()).map(|r| (t, r)))
        .collect::<timecon::Result<Vec<_>>>()?;
    let fmt = |x: &Rational| timecon::scalar::format_sig(x.to_f64(), 10);
    let rows: Vec<SweepRow> = reports
        .iter()
        .map(|(t, r)| SweepRow {
            t: *t,
            delta: fmt(delta),
            epsilon: fmt(eps),
            regret: fmt(&r.regret.regret),
            closed_form: fmt(&r.closed_form),
            stated_lower: fmt(&r.stated_lower),
            upper: fmt(&r.upper),
            bound: fmt(&r.bound),
            lower_holds: r.lower_holds,
            upper_holds: r.upper_holds,
        })
        .collect();
    if let Some(path) = csv_path {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        for row in &rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.t.to_string(),
                r.regret.clone(),
                r.bound.clone(),
                r.stated_lower.clone(),
                r.upper.clone(),
                r.lower_holds.to_string(),
            ]
        })
        .collect();
    let text = format!("{}\n", table(&["t", "regret", "bound", "stated lower", "upper", "lower holds"], &cells));
    let json = json!({ "command": "regret-sweep", "rows": serde_json::to_value(&rows)? });
    Ok(Outcome::ok(text, json))
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[command(flatten)]
    pub env: EnvSource,
}

pub fn export_env(args: &ExportArgs) -> Result<Outcome> {
    let env = args.env.resolve()?;
    let text = environment_to_json(&env);
    let json: Value = serde_json::from_str(&text)?;
    Ok(Outcome::ok(text + "\n", json))
}

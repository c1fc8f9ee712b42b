//! Browser bindings: three small explorers that return JSON strings.

use serde_json::{json, Value};
use timecon::builtin::zigzag;
use timecon::scalar::{display_value, parse_exact};
use timecon::*;
use wasm_bindgen::prelude::*;

fn num(x: &Rational) -> Value {
    Value::String(display_value(x))
}

fn parse(text: &str, what: &str) -> Result<Rational, String> {
    parse_exact(text).ok_or_else(|| format!("{what}: cannot read '{text}' as a number"))
}

fn tol() -> Rational {
    Rational::from_ratio(1, 1_000_000_000)
}

fn path_of(env: &Environment<Rational>, policy: &Policy, horizon: usize) -> Vec<String> {
    let mut s = env.start();
    let mut out = Vec::new();
    for t in 1..=horizon {
        let Some(a) = policy.action(t, s) else { break };
        out.push(env.action_name(s, a).to_string());
        s = env.successors(s, a)[0].target;
    }
    out
}

/// Plan, mixed rollout and lowest-index equilibrium on a zig-zag of `length`.
pub fn zigzag_report(length: usize, discount: &str) -> Result<Value, String> {
    if !(2..=40).contains(&length) {
        return Err("length must be between 2 and 40".into());
    }
    let env = zigzag::<Rational>(length).map_err(|e| e.to_string())?;
    let m: DiscountMatrix<Rational> = load_discount(discount).map_err(|e| e.to_string())?;
    let root = HistoryNode::root(&env);
    let first = m.column(1).map_err(|e| e.to_string())?;
    let (plan, report) = optimal_policy(&env, &first, &root, &tol()).map_err(|e| e.to_string())?;
    let run = mixed_policy_rollout(&env, &m, &root, length, &tol()).map_err(|e| e.to_string())?;
    let played = value(&env, &run.policy, &root, &first, &tol()).map_err(|e| e.to_string())?;
    let mut out = json!({
        "plan": { "value": num(&report.value), "path": path_of(&env, &plan, length) },
        "mixed": {
            "value": num(&played.value),
            "path": path_of(&env, &run.policy, length),
            "rewards": run.rewards.values().iter().map(num).collect::<Vec<_>>(),
        },
        "spe": Value::Null,
    });
    // Equilibria need a finite window; skip quietly when there is none.
    let players = length.min(12);
    if let Ok(spe) = spe_backward_induction(&env, &m, players, TieRule::LowestIndex) {
        out["spe"] = json!({
            "players": players,
            "path": path_of(&env, &spe.policy, players),
            "value": spe.player_value(1, env.start()).map(num),
        });
    }
    Ok(out)
}

pub fn lower_bound_report(delta: &str, t: usize, epsilon: &str) -> Result<Value, String> {
    if !(2..=60).contains(&t) {
        return Err("t must be between 2 and 60".into());
    }
    let (delta, epsilon) = (parse(delta, "delta")?, parse(epsilon, "epsilon")?);
    let r = tightness_experiment(&delta, t, &epsilon, &Rational::zero()).map_err(|e| e.to_string())?;
    Ok(json!({
        "v_star": num(&r.regret.v_star),
        "v_mixed": num(&r.regret.v_mixed),
        "regret": num(&r.regret.regret),
        "closed_form": num(&r.closed_form),
        "bound": num(&r.bound),
        "upper": num(&r.upper),
        "upper_holds": r.upper_holds,
        "stated_lower": num(&r.stated_lower),
        "lower_holds": r.lower_holds,
    }))
}

pub fn consistency_report(discount: &str, k: usize, t: usize) -> Result<Value, String> {
    let m: DiscountMatrix<Rational> = load_discount(discount).map_err(|e| e.to_string())?;
    let (k, t) = (k.clamp(1, 60), t.clamp(1, 60));
    let r = is_time_consistent(&m, k, t, &tol()).map_err(|e| e.to_string())?;
    let grid: Vec<Vec<Value>> = (1..=k.min(8))
        .map(|col| (1..=t.min(8)).map(|row| m.entry(col, row).map(|x| num(&x)).unwrap_or(Value::Null)).collect())
        .collect();
    Ok(json!({
        "consistent": r.consistent,
        "alphas": if r.consistent { r.alphas.iter().take(8).map(num).collect::<Vec<_>>() } else { Vec::new() },
        "witness": r.witness.map(|(k, t)| json!({ "k": k, "t": t })),
        "columns": grid,
    }))
}

fn to_js(result: Result<Value, String>) -> Result<String, JsValue> {
    result.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn explore_zigzag(length: usize, discount_json: &str) -> Result<String, JsValue> {
    to_js(zigzag_report(length, discount_json))
}

#[wasm_bindgen]
pub fn explore_lower_bound(delta: &str, t: usize, epsilon: &str) -> Result<String, JsValue> {
    to_js(lower_bound_report(delta, t, epsilon))
}

#[wasm_bindgen]
pub fn check_consistency(discount_json: &str, k: usize, t: usize) -> Result<String, JsValue> {
    to_js(consistency_report(discount_json, k, t))
}

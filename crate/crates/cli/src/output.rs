//! Number formatting, aligned tables and JSON helpers.

use serde_json::{json, Value};
use timecon::policy::PolicyRow;
use timecon::scalar::{display_value, format_sig};
use timecon::{Decision, Environment, Policy, Rational, Rollout, Scalar};

/// Ten significant digits with the exact fraction alongside.
pub fn show(x: &Rational) -> String {
    display_value(x)
}

pub fn num(x: &Rational) -> Value {
    let fraction = x.fraction().filter(|f| f.len() <= 60);
    json!({ "decimal": format_sig(x.to_f64(), 10), "fraction": fraction })
}

pub fn nums(xs: &[Rational]) -> Value {
    Value::Array(xs.iter().map(num).collect())
}

pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = vec![line(headers.to_vec())];
    out.push(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    for row in rows {
        out.push(line(row.iter().map(String::as_str).collect()));
    }
    out.join("\n")
}

/// Decisions at the nodes the policy reaches with positive probability.
pub fn on_path(env: &Environment<Rational>, policy: &Policy, horizon: usize) -> Vec<PolicyRow> {
    let mut rows = Vec::new();
    let mut reached = vec![env.start()];
    for t in 1..=horizon {
        let mut next = Vec::new();
        for &s in &reached {
            if let Decision::Act(a) = policy.decide(t, s) {
                rows.push(PolicyRow {
                    time: t,
                    state: env.state_name(s).to_string(),
                    action: env.action_name(s, a).to_string(),
                });
                for tr in env.successors(s, a) {
                    if tr.prob.is_positive() && !next.contains(&tr.target) {
                        next.push(tr.target);
                    }
                }
            }
        }
        next.sort_unstable();
        reached = next;
    }
    rows
}

/// `t, state, action, expected reward` rows; with several reachable states
/// at one time the reward appears on the first of them.
pub fn policy_rows_or_trace(env: &Environment<Rational>, run: &Rollout<Rational>, horizon: usize) -> Vec<Vec<String>> {
    let mut last = 0;
    on_path(env, &run.policy, horizon)
        .into_iter()
        .map(|row| {
            let reward = if row.time != last { show(&run.rewards.at(row.time)) } else { String::new() };
            last = row.time;
            vec![row.time.to_string(), row.state, row.action, reward]
        })
        .collect()
}

pub fn policy_table(rows: &[PolicyRow]) -> String {
    let cells: Vec<Vec<String>> =
        rows.iter().map(|r| vec![r.time.to_string(), r.state.clone(), r.action.clone()]).collect();
    table(&["t", "state", "action"], &cells)
}

pub fn rows_json(rows: &[PolicyRow]) -> Value {
    serde_json::to_value(rows).expect("rows serialise")
}

pub fn print_json(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json serialises"));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_columns() {
        let t = table(&["a", "bb"], &[vec!["long".into(), "x".into()]]);
        assert_eq!(t, "a     bb\n----  --\nlong  x");
    }

    #[test]
    fn numbers_carry_fractions() {
        let v = num(&Rational::from_ratio(2, 3));
        assert_eq!(v["decimal"], "0.6666666667");
        assert_eq!(v["fraction"], "2/3");
    }
}

//! JSON formats for environments and discount documents.
//!
//! Numbers may be written as JSON numbers or as strings such as `"2/3"`;
//! with rational scalars both parse exactly (`0.1` is `1/10`).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::discount::Family;
use crate::env::{validate_environment, Action, Diagnostic, Environment, Rule, State, TailKind, Transition};
use crate::error::{Error, Result};
use crate::matrix::{ColumnRule, DiscountMatrix};
use crate::scalar::{parse_exact, Rational, Scalar};

#[derive(Debug, Serialize, Deserialize)]
struct EnvFile {
    states: Vec<StateFile>,
    start: String,
    #[serde(default)]
    tail: Option<TailFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reward_bound: Option<Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TailFile {
    kind: TailKind,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateFile {
    id: String,
    actions: Vec<ActionFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ActionFile {
    id: String,
    reward: Value,
    to: Vec<TransitionFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TransitionFile {
    state: String,
    p: Value,
}

fn parse_rational(value: &Value, what: &str) -> Result<Rational> {
    let text = match value {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => return Err(Error::Parse(format!("{what}: expected a number, got {other}"))),
    };
    parse_exact(&text).ok_or_else(|| Error::Parse(format!("{what}: cannot read '{text}' as a number")))
}

fn parse_scalar<S: Scalar>(value: &Value, what: &str) -> Result<S> {
    Ok(S::from_rational(&parse_rational(value, what)?))
}

fn scalar_value<S: Scalar>(x: &S) -> Value {
    match x.fraction() {
        Some(f) => Value::String(f),
        None => serde_json::Number::from_f64(x.to_f64()).map(Value::Number).unwrap_or(Value::Null),
    }
}

/// Parses and validates an environment; any diagnostic rejects it.
pub fn load_environment<S: Scalar>(text: &str) -> Result<Environment<S>> {
    let file: EnvFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let index: HashMap<&str, usize> = file.states.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let mut diagnostics = Vec::new();
    let mut states = Vec::with_capacity(file.states.len());
    for state in &file.states {
        let mut actions = Vec::with_capacity(state.actions.len());
        for action in &state.actions {
            let what = format!("state '{}' action '{}'", state.id, action.id);
            let mut successors = Vec::with_capacity(action.to.len());
            for tr in &action.to {
                let prob = parse_scalar(&tr.p, &what)?;
                match index.get(tr.state.as_str()) {
                    Some(&target) => successors.push(Transition { target, prob }),
                    None => diagnostics.push(Diagnostic {
                        state: Some(state.id.clone()),
                        action: Some(action.id.clone()),
                        rule: Rule::BadReference,
                        detail: format!("unknown successor state '{}'", tr.state),
                    }),
                }
            }
            actions.push(Action { id: action.id.clone(), reward: parse_scalar(&action.reward, &what)?, successors });
        }
        states.push(State { id: state.id.clone(), actions });
    }
    let start = match index.get(file.start.as_str()) {
        Some(&s) => s,
        None => {
            diagnostics.push(Diagnostic {
                state: None,
                action: None,
                rule: Rule::BadStart,
                detail: format!("start state '{}' is not defined", file.start),
            });
            0
        }
    };
    if !diagnostics.is_empty() {
        return Err(Error::InvalidEnvironment(diagnostics));
    }
    let bound = match &file.reward_bound {
        Some(v) => parse_scalar(v, "reward_bound")?,
        None => S::one(),
    };
    let tail = file.tail.map(|t| t.kind).unwrap_or_default();
    let env = Environment::from_parts(states, start, tail, bound);
    let diagnostics = validate_environment(&env);
    if diagnostics.is_empty() {
        Ok(env)
    } else {
        Err(Error::InvalidEnvironment(diagnostics))
    }
}

/// Pretty JSON that [`load_environment`] reads back to the same environment.
pub fn environment_to_json<S: Scalar>(env: &Environment<S>) -> String {
    let file = EnvFile {
        states: env
            .states()
            .iter()
            .map(|s| StateFile {
                id: s.id.clone(),
                actions: s
                    .actions
                    .iter()
                    .map(|a| ActionFile {
                        id: a.id.clone(),
                        reward: scalar_value(&a.reward),
                        to: a
                            .successors
                            .iter()
                            .map(|t| TransitionFile {
                                state: env.state_name(t.target).to_string(),
                                p: scalar_value(&t.prob),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
        start: env.state_name(env.start()).to_string(),
        tail: Some(TailFile { kind: env.tail() }),
        reward_bound: (!env.reward_bound().is_one()).then(|| scalar_value(env.reward_bound())),
    };
    serde_json::to_string_pretty(&file).expect("environment serialises")
}

/// A discount source: a family, or explicit columns with a rule for the rest.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum DiscountFile {
    Family(FamilyFile),
    Matrix {
        columns: Vec<Vec<Value>>,
        #[serde(default)]
        beyond: Beyond,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Beyond {
    #[default]
    None,
    ConstantColumns,
    Sliding,
}

#[derive(Debug, Deserialize)]
struct FamilyFile {
    family: String,
    #[serde(flatten)]
    params: HashMap<String, Value>,
}

/// Family by name with parameters `horizon`, `lifetime`, `kappa`, `beta`, `gamma`.
pub fn family_from_params(name: &str, params: &HashMap<String, Value>) -> Result<Family> {
    let get =
        |key: &str| params.get(key).ok_or_else(|| Error::Parse(format!("family '{name}' needs parameter '{key}'")));
    let integer = |key: &str| -> Result<usize> {
        get(key)?
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| Error::Parse(format!("'{key}' must be a positive integer")))
    };
    let rational = |key: &str| parse_rational(get(key)?, key);
    let family = match name.replace('_', "-").as_str() {
        "constant-horizon" => Family::ConstantHorizon { horizon: integer("horizon")? },
        "fixed-lifetime" => Family::FixedLifetime { lifetime: integer("lifetime")? },
        "hyperbolic" => Family::Hyperbolic { kappa: rational("kappa")? },
        "power-hyperbolic" => Family::PowerHyperbolic {
            kappa: Scalar::to_f64(&rational("kappa")?),
            beta: Scalar::to_f64(&rational("beta")?),
        },
        "geometric" => Family::Geometric { gamma: rational("gamma")? },
        "sliding-geometric" => Family::SlidingGeometric { gamma: rational("gamma")? },
        "no-discounting" => Family::NoDiscounting,
        other => return Err(Error::Parse(format!("unknown discount family '{other}'"))),
    };
    family.check()?;
    Ok(family)
}

/// Reads a discount document. Matrix columns are full vectors from
/// `t = 1`; entries before a column's age are ignored.
pub fn load_discount<S: Scalar>(text: &str) -> Result<DiscountMatrix<S>> {
    let file: DiscountFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    match file {
        DiscountFile::Family(f) => DiscountMatrix::family(family_from_params(&f.family, &f.params)?),
        DiscountFile::Matrix { columns, beyond } => {
            let rows = columns
                .iter()
                .enumerate()
                .map(|(k, col)| {
                    col.iter().map(|v| parse_scalar(v, &format!("column {}", k + 1))).collect::<Result<Vec<S>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let rule = match beyond {
                Beyond::None => ColumnRule::None,
                Beyond::ConstantColumns => ColumnRule::RepeatLast,
                Beyond::Sliding => ColumnRule::Sliding,
            };
            let m = DiscountMatrix::from_rows(&rows, rule)?;
            for c in m.explicit_columns() {
                c.validate()?;
            }
            Ok(m)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{split_game, three_step_game};

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn environment_round_trip() {
        let env = split_game::<Rational>();
        let back: Environment<Rational> = load_environment(&environment_to_json(&env)).unwrap();
        assert_eq!(back, env);
        let env = three_step_game::<Rational>();
        assert_eq!(load_environment::<Rational>(&environment_to_json(&env)).unwrap(), env);
    }

    #[test]
    fn decimal_and_fraction_inputs_are_exact() {
        let text = r#"{"states":[
            {"id":"a","actions":[{"id":"go","reward":0.1,"to":[{"state":"a","p":"1/3"},{"state":"b","p":"2/3"}]}]},
            {"id":"b","actions":[{"id":"stay","reward":0,"to":[{"state":"b","p":1}]}]}],
            "start":"a","tail":{"kind":"loop"}}"#;
        let env: Environment<Rational> = load_environment(text).unwrap();
        assert_eq!(env.reward(0, 0), &q(1, 10));
        assert_eq!(env.successors(0, 0)[1].prob, q(2, 3));
    }

    #[test]
    fn bad_reference_and_sum_are_reported() {
        let text = r#"{"states":[{"id":"a","actions":[{"id":"go","reward":0,"to":[{"state":"nowhere","p":1}]}]}],"start":"a"}"#;
        match load_environment::<f64>(text) {
            Err(Error::InvalidEnvironment(d)) => assert_eq!(d[0].rule, Rule::BadReference),
            other => panic!("{other:?}"),
        }
        let text = r#"{"states":[{"id":"a","actions":[{"id":"go","reward":0,"to":[{"state":"a","p":0.6},{"state":"a","p":0.5}]}]}],"start":"a"}"#;
        match load_environment::<Rational>(text) {
            Err(Error::InvalidEnvironment(d)) => {
                assert_eq!(d[0].rule, Rule::ProbabilitySum);
                assert!(d[0].to_string().contains("1.1"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(load_environment::<f64>("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn discount_files() {
        let m: DiscountMatrix<Rational> =
            load_discount(r#"{"kind":"family","family":"geometric","gamma":0.9}"#).unwrap();
        assert_eq!(m.entry(1, 2).unwrap(), q(81, 100));
        let m: DiscountMatrix<Rational> =
            load_discount(r#"{"kind":"matrix","columns":[[1,"1/2"],[0,1]],"beyond":"sliding"}"#).unwrap();
        assert_eq!(m.entry(3, 3).unwrap(), q(1, 1));
        assert_eq!(m.entry(3, 4).unwrap(), q(1, 2));
        assert!(load_discount::<f64>(r#"{"kind":"family","family":"geometric","gamma":1.5}"#).is_err());
        assert!(load_discount::<f64>(r#"{"kind":"family","family":"weird"}"#).is_err());
        assert!(load_discount::<f64>(r#"{"kind":"matrix","columns":[[-1]]}"#).is_err());
    }
}

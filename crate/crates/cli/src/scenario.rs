//! Resolving command-line sources into a validated environment and matrix.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::Value;
use timecon::builtin::{build_named, three_step_matrix, BuiltinParams, BUILTIN_NAMES};
use timecon::equilibrium::split_game_matrix;
use timecon::io::family_from_params;
use timecon::scalar::parse_exact;
use timecon::{
    build_lower_bound_instance, load_discount, load_environment, DiscountMatrix, Environment, Rational, Scalar,
};

#[derive(Args, Debug, Clone, Default)]
pub struct EnvSource {
    /// Built-in environment: pizza-pasta, zigzag, three-step, split, lower-bound.
    #[arg(long, conflicts_with = "env")]
    pub builtin: Option<String>,
    /// Environment JSON file.
    #[arg(long)]
    pub env: Option<PathBuf>,
    /// Zig-zag length.
    #[arg(long)]
    pub length: Option<usize>,
    /// Lower-bound chain epsilon.
    #[arg(long)]
    pub chain_epsilon: Option<String>,
    /// Lower-bound chain length t.
    #[arg(long)]
    pub chain_t: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct DiscountSource {
    /// Family with parameters, e.g. `geometric:gamma=0.9` or `constant-horizon:horizon=2`.
    #[arg(long, conflicts_with_all = ["discount", "matrix"])]
    pub family: Option<String>,
    /// Discount JSON file.
    #[arg(long, conflicts_with = "matrix")]
    pub discount: Option<PathBuf>,
    /// Built-in matrix: three-step, split, or lower-bound:delta=..,t=..,epsilon=..
    #[arg(long)]
    pub matrix: Option<String>,
}

pub fn parse_number(text: &str) -> Result<Rational> {
    parse_exact(text).with_context(|| format!("cannot read '{text}' as a number"))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

impl EnvSource {
    pub fn resolve(&self) -> Result<Environment<Rational>> {
        match (&self.builtin, &self.env) {
            (Some(name), _) => {
                let params = BuiltinParams {
                    length: self.length,
                    epsilon: self.chain_epsilon.as_deref().map(parse_number).transpose()?,
                    t: self.chain_t,
                };
                Ok(build_named(name, &params)?)
            }
            (None, Some(path)) => Ok(load_environment(&read(path)?)?),
            (None, None) => {
                let names: Vec<&str> = BUILTIN_NAMES.iter().map(|(n, _)| *n).collect();
                bail!("give --env FILE or --builtin NAME ({})", names.join(", "))
            }
        }
    }
}

/// `name:key=value,key=value` into a name and a parameter map.
fn split_spec(spec: &str) -> (String, HashMap<String, Value>) {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let params = rest
        .split(',')
        .filter(|p| !p.is_empty())
        .filter_map(|p| p.split_once('='))
        .map(|(k, v)| {
            let value = v.parse::<u64>().map(Value::from).unwrap_or_else(|_| Value::String(v.to_string()));
            (k.trim().to_string(), value)
        })
        .collect();
    (name.trim().to_string(), params)
}

impl DiscountSource {
    pub fn resolve(&self) -> Result<DiscountMatrix<Rational>> {
        if let Some(spec) = &self.family {
            let (name, params) = split_spec(spec);
            return Ok(DiscountMatrix::family(family_from_params(&name, &params)?)?);
        }
        if let Some(path) = &self.discount {
            return Ok(load_discount(&read(path)?)?);
        }
        if let Some(spec) = &self.matrix {
            let (name, params) = split_spec(spec);
            return match name.as_str() {
                "three-step" => Ok(three_step_matrix()),
                "split" => Ok(split_game_matrix()),
                "lower-bound" => {
                    let get = |k: &str| -> Result<Rational> {
                        match params.get(k) {
                            Some(Value::String(s)) => parse_number(s),
                            Some(Value::Number(n)) => parse_number(&n.to_string()),
                            _ => bail!("lower-bound matrix needs {k}="),
                        }
                    };
                    let t = get("t")?.to_f64() as usize;
                    Ok(build_lower_bound_instance(&get("delta")?, t, &get("epsilon")?)?.1)
                }
                other => bail!("unknown built-in matrix '{other}' (three-step, split, lower-bound)"),
            };
        }
        bail!("give --family SPEC, --discount FILE or --matrix NAME")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_specs() {
        let (name, params) = split_spec("constant-horizon:horizon=2");
        assert_eq!(name, "constant-horizon");
        assert_eq!(params["horizon"], Value::from(2u64));
        let (_, params) = split_spec("geometric:gamma=0.9");
        assert_eq!(params["gamma"], Value::String("0.9".into()));
        let src = DiscountSource { family: Some("geometric:gamma=1/2".into()), ..Default::default() };
        assert_eq!(src.resolve().unwrap().entry(1, 2).unwrap(), Rational::from_ratio(1, 4));
    }
}

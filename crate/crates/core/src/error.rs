use thiserror::Error;

use crate::env::Diagnostic;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid environment: {}", join(.0))]
    InvalidEnvironment(Vec<Diagnostic>),

    #[error("unknown state '{0}'")]
    UnknownState(String),

    #[error("unknown environment '{0}'")]
    UnknownEnvironment(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("horizon {horizon} precedes start time {start}")]
    HorizonBeforeStart { horizon: usize, start: usize },

    #[error("policy undefined at time {time} in state '{state}'")]
    UndefinedPolicy { time: usize, state: String },

    #[error("path does not start at the start node's state")]
    PathStart,

    #[error("discount vector of age {age} has no positive entry at t >= {age}{}", until.map(|u| format!(" up to t = {u}")).unwrap_or_default())]
    DegenerateColumn { age: usize, until: Option<usize> },

    #[error("discount vector of age {age} has a negative or non-finite entry at t = {time}")]
    InvalidDiscountEntry { age: usize, time: usize },

    #[error("discount column {0} is not available (matrix has no rule beyond its explicit columns)")]
    ColumnUnavailable(usize),

    #[error("discount vector of age {age} is not summable and the environment keeps paying rewards")]
    NonSummable { age: usize },

    #[error("distance between non-summable tails of different shape is infinite")]
    IncomparableTails,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("enumeration budget exceeded: {needed} candidates > budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("continuity cut time not found within depth {0}")]
    CutNotFound(usize),

    #[error("parse error: {0}")]
    Parse(String),
}

fn join(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

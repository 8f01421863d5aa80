use std::path::PathBuf;

use thiserror::Error;

/// A single violated feasibility constraint.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("C1: column {column} has weight {weight}, expected {expected}")]
    ColumnWeight {
        column: usize,
        weight: usize,
        expected: usize,
    },
    #[error("C2: entry ({row}, {column}) is {value}, expected 0 or 1")]
    NonBinary { row: usize, column: usize, value: u8 },
    #[error("C3: column {second} duplicates column {first}")]
    DuplicateColumn { first: usize, second: usize },
    #[error("user {user} has power {value} on unassigned subcarrier {subcarrier}")]
    PowerOutsideSupport {
        user: usize,
        subcarrier: usize,
        value: f64,
    },
    #[error("C4: user {user} transmits {total} W, budget {budget} W")]
    BudgetExceeded { user: usize, total: f64, budget: f64 },
    #[error("user {user} transmits {total} W, equality budget {budget} W")]
    BudgetNotMet { user: usize, total: f64, budget: f64 },
    #[error("C5: user {user} has power {value} on subcarrier {subcarrier}")]
    NegativePower {
        user: usize,
        subcarrier: usize,
        value: f64,
    },
    #[error("user {user} has non-finite power on subcarrier {subcarrier}")]
    NonFinitePower { user: usize, subcarrier: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("constraint violated: {0}")]
    Constraint(#[from] Violation),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("no feasible column in {phase} phase for user {user}")]
    Infeasible { phase: &'static str, user: usize },
    #[error("{0}")]
    Undefined(&'static str),
    #[error("exhaustive search over {count} factor graphs exceeds cap {cap}")]
    SearchTooLarge { count: u128, cap: u128 },
    #[error("factor graph count overflows u128 for K={k}, N={n}, J={j}")]
    CountOverflow { k: usize, n: usize, j: usize },
    #[error("fixed assignment only exists for K=4, N=2, J=6 (got K={k}, N={n}, J={j}); use random_assignment")]
    UnsupportedDimensions { k: usize, n: usize, j: usize },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown case `{0}`")]
    UnknownCase(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

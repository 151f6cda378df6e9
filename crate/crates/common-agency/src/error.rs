use crate::rational::Rational;

/// Errors raised by the finite-game and continuous-model routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("distribution sums to {0}")]
    Distribution(Rational),
    #[error("missing table entry: {0}")]
    MissingEntry(String),
    #[error("independent-mode table for principal {principal} varies with rival outcomes at {detail}")]
    NotIndependent { principal: String, detail: String },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("no feasible mechanism: {0}")]
    Infeasible(String),
    #[error("{what} exceeds bound {limit} (got {got})")]
    BoundExceeded { what: &'static str, limit: usize, got: usize },
    #[error("agent strategy undefined at {0}")]
    StrategyUndefined(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

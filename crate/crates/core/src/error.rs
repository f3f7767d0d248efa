use thiserror::Error;

/// Errors raised by the core engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("transition row {row} is not stochastic: {reason}")]
    NonStochastic { row: usize, reason: String },
    #[error("budget exceeded: {what} ({value} > limit {limit})")]
    Budget { what: String, value: f64, limit: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("multiplier {value} at node {node} exceeds 1 in absolute value")]
    Multiplier { node: usize, value: f64 },
    #[error("differential subordination fails: worst violation {worst} at skeleton point {at}")]
    NotSubordinate { worst: f64, at: usize },
    #[error("unstable Euler step: need dt < {required_dt:.3e}, got {dt:.3e}")]
    Unstable { dt: f64, required_dt: f64 },
    #[error("unsupported pairing: {0}")]
    Unsupported(String),
    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("construction failure: {0}")]
    Construction(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The parameters are individually valid but admit no solution.
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    /// The solved distribution collapsed to a point mass at pmax.
    #[error("degenerate distribution: point mass at pmax = {pmax}")]
    Degenerate { pmax: f64 },
    /// A simulation or sweep configuration violates its invariants.
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed input data, e.g. a CSV file that cannot be read back.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad counts, radii, rates, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A cell id that does not exist in the topology.
    #[error("unknown cell id {0}")]
    UnknownCell(u32),

    /// Numerical routine failed to converge or produced a non-finite value.
    #[error("numeric error in {what}: {detail}")]
    Numeric { what: String, detail: String },

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Markov chain has no unique stationary distribution.
    #[error("stationary distribution is not unique: {0}")]
    Multiplicity(String),

    /// Missing or malformed input data (e.g. empty state trace).
    #[error("data error: {0}")]
    Data(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numeric(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numeric {
            what: what.into(),
            detail: detail.into(),
        }
    }
}

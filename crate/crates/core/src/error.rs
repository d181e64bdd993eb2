//! Error taxonomy shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor extents that cannot be reconciled (mismatched dims, bad broadcast, ...).
    #[error("shape error: {0}")]
    Shape(String),

    /// An argument outside its valid domain (class index out of range, empty sample set, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Non-finite values or a numerically failed computation.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Inconsistent or invalid configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed input data (bad magic, ragged rows, unparsable fields, ...).
    #[error("format error: {0}")]
    Format(String),

    /// The evaluation classifier is too weak for its metrics to mean anything.
    #[error("metric unreliable: {0}")]
    MetricUnreliable(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

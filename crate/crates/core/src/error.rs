use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A physical input is outside its domain (non-positive mass, temperature, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// Inconsistent or unsupported configuration (grid too small, incommensurate lattice, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// Incompatible unit dimensions.
    #[error("unit error: cannot convert {from} to {to}")]
    Unit { from: &'static str, to: &'static str },
    /// Numerical failure: non-convergence, basis spill, vanishing amplitudes.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// An operation was called with arguments that do not fit together.
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

use std::fmt;

/// Errors raised by the solvers, diagnostics and harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the admissible set of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A precondition on the input structure (parity, grid, localization) is violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A field became non-finite while time stepping.
    #[error("blow-up: field `{field}` became non-finite at t = {time}")]
    BlowUp { field: String, time: f64 },

    /// A configuration file could not be understood.
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    /// A snapshot or table file is malformed.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl fmt::Display) -> Self {
        Error::Domain(msg.to_string())
    }

    pub(crate) fn contract(msg: impl fmt::Display) -> Self {
        Error::Contract(msg.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use std::io;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The explicit backward scheme would be unstable for this grid.
    #[error("stability error: intensity x time step = {product:.4} exceeds {limit}")]
    Stability { product: f64, limit: f64 },

    /// The computational grid is malformed or too small for the price law.
    #[error("grid error: {0}")]
    Grid(String),

    /// An exhaustive enumeration would exceed its size cap.
    #[error("size error: {0}")]
    Size(String),

    /// The configuration file could not be parsed or has an unknown/missing key.
    #[error("schema error: {0}")]
    Schema(String),

    /// A configuration value has an invalid sign or magnitude.
    #[error("unit error in `{field}`: {message}")]
    Unit { field: String, message: String },

    /// A bid table file is malformed.
    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code for the command-line front end
    /// (1 config, 2 numerical, 3 I/O).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) | Error::Unit { .. } => 1,
            Error::Domain(_) | Error::Stability { .. } | Error::Grid(_) | Error::Size(_) => 2,
            Error::Format(_) | Error::Io(_) => 3,
        }
    }

    pub(crate) fn unit(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Unit { field: field.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Field-level misuse: composite order, mismatched orders, inverse of zero.
    #[error("field error: {0}")]
    Field(String),

    /// Caller passed arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// Invalid configuration or code parameters.
    #[error("config error: {0}")]
    Config(String),

    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("code generation failed: {0}")]
    Generation(String),

    #[error("enumeration budget exceeded: {states} states requested, budget is {budget}")]
    Budget { states: f64, budget: u64 },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than a failure while running.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Field(_)
                | Error::Usage(_)
                | Error::Config(_)
                | Error::Domain(_)
                | Error::Parse { .. }
                | Error::Budget { .. }
        )
    }
}

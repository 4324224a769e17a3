use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the disambiguation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An input file is missing or unreadable. Carries the offending path so
    /// callers can report exactly what was expected where.
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path} (line {line}): {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed delimited file {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("columnar file {path}: {message}")]
    Columnar { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Rejected value (empty string after normalization, malformed ID, ...).
    #[error("rejected: {0}")]
    Rejected(String),

    /// Two sketches or indexes built with incompatible parameters were mixed.
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),
}

impl Error {
    /// Whether this error was caused by bad or missing user input, as opposed
    /// to an internal failure. Drives the CLI exit-code convention.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Json { .. }
                | Error::Csv { .. }
                | Error::Columnar { .. }
                | Error::Config(_)
                | Error::InvalidInput(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user input: architecture, method set, thresholds, flags.
    #[error("configuration error: {0}")]
    Config(String),

    /// Several configuration problems found in one validation pass.
    #[error("configuration errors:\n  - {}", .0.join("\n  - "))]
    ConfigList(Vec<String>),

    /// A genotype value outside its gene domain.
    #[error("closure violation at gene {gene}: value {value} outside {domain}")]
    Domain {
        gene: usize,
        value: f64,
        domain: String,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// The accuracy oracle (in-process or remote workers) failed.
    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    /// An internal invariant was broken. Indicates a bug.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn oracle(msg: impl Into<String>) -> Self {
        Error::Oracle(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::ConfigList(_)
            | Error::Dimension { .. }
            | Error::Domain { .. }
            | Error::Io { .. }
            | Error::Json { .. }
            | Error::Csv(_) => 2,
            Error::Oracle(_) | Error::Protocol(_) => 3,
            Error::Invariant(_) => 4,
        }
    }
}

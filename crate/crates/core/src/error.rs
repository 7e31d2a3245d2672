//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed text input, located by file and 1-based line number.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Malformed binary input (bad magic, truncation, non-finite payload).
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    /// A value violates a type invariant or an operation precondition.
    #[error("{0}")]
    Invalid(String),

    /// Shape disagreement between data and model.
    #[error("dimension mismatch: {0}")]
    Shape(String),

    /// Non-finite number where a finite one is required.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A pipeline stage failed; wraps the underlying error with context.
    #[error("round {round}, stage {stage}: {source}")]
    Stage {
        round: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Attach pipeline stage context to an error.
    pub fn in_stage(self, round: usize, stage: &'static str) -> Self {
        Error::Stage {
            round,
            stage,
            source: Box::new(self),
        }
    }
}

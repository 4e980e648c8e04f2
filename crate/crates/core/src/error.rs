use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {origin} (line {line}): {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    /// Mesh cannot resolve the requested geometry at the given density.
    #[error("mesh refinement required: {0}")]
    Refinement(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("query outside domain: {0}")]
    OutOfDomain(String),

    #[error("resonance not captured: {0}")]
    Resonance(String),

    #[error("fit did not converge: {0}")]
    Convergence(String),

    #[error("parameter at bound: {0}")]
    AtBound(String),

    #[error("underdetermined problem: {0}")]
    Underdetermined(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(origin: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            origin: origin.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by bad configuration or input files rather
    /// than a numerical failure at run time.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Parse { .. } | Error::Validation(_) | Error::Invalid(_)
        )
    }
}

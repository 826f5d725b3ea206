use std::path::PathBuf;

use thiserror::Error;

use crate::solver::FitReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for {len} slices")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("fit diverged at outer iteration {iteration}")]
    Diverged { iteration: usize, report: Box<FitReport> },

    #[error("all {n_inits} initializations failed; last error: {last}")]
    AllInitsFailed { n_inits: usize, last: String },

    #[error("data tensor has zero norm")]
    ZeroData,

    #[error("component {component} of mode {mode} is identically zero")]
    ZeroComponent { mode: char, component: usize },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors raised by the numerics rather than by inputs or IO.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate(_) | Error::Diverged { .. } | Error::NonFinite(_) | Error::AllInitsFailed { .. }
        )
    }
}

use thiserror::Error;

use crate::waveform::WaveformSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Iterative oracle hit its iteration budget; carries the best iterate seen.
    #[error("oracle did not reach stationarity after {iterations} iterations (best objective {objective:.6e})")]
    NotConverged {
        iterations: usize,
        objective: f64,
        best: Box<WaveformSolution>,
    },

    #[error("configuration key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn dims(op: &'static str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            op,
            expected: expected.into(),
            got: got.into(),
        }
    }

    /// Process exit code: 1 for validation problems, 2 for runtime or numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config { .. } | Error::DimensionMismatch { .. } => 1,
            Error::Trial { source, .. } => source.exit_code().max(2),
            Error::Numerical(_) | Error::NotConverged { .. } | Error::Io { .. } => 2,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("stationary distribution did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("state {state} has stationary mass {mass:.3e}; reversal is undefined")]
    ZeroMass { state: usize, mass: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("linear system is numerically singular")]
    SingularSystem,

    #[error("row {row} is not a probability distribution (sum {sum}, min {min})")]
    NotStochastic { row: usize, sum: f64, min: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("only {visited} distinct states visited within {steps} steps (wanted {wanted})")]
    TrajectoryTooShort {
        visited: usize,
        wanted: usize,
        steps: usize,
    },

    #[error("parameter diverged: |theta| = {theta:.3e} at step {step}")]
    Divergence { theta: f64, step: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

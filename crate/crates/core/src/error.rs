use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the solvers, auditors and scenario loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("profile constraint violated at sample {index}: u = {u}, v = {v}")]
    ProfileConstraint { index: usize, u: f64, v: f64 },

    #[error("solver did not converge: gap {gap:e} > tolerance {tolerance:e} after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        gap: f64,
        tolerance: f64,
    },

    #[error("step {step} (t = {time}): {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("brute force limited to {limit} admissible cells, got {count}")]
    TooManyCells { count: usize, limit: usize },

    #[error("trajectory is not monotone: step {step} adds cells")]
    NonMonotoneTrajectory { step: usize },

    #[error("forcing is not monotone: F({earlier}) is not contained in F({later})")]
    NonMonotoneForcing { earlier: f64, later: f64 },

    #[error("infeasible brittle start: initial set meets F(0) in {cells} cells")]
    InfeasibleStart { cells: usize },

    #[error("uniform energy bound violated at t = {time}: {energy} > {bound}")]
    UniformBound { time: f64, energy: f64, bound: f64 },

    #[error("configuration error at `{pointer}`: {message}")]
    Config { pointer: String, message: String },

    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Innermost error, looking through step wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

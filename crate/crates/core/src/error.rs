use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid matrix structure: {0}")]
    InvalidMatrix(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("singular matrix: pivot {pivot:e} at step {step} is below threshold {threshold:e}")]
    Singular { step: usize, pivot: f64, threshold: f64 },

    #[error("oracle size cap exceeded: n = {n}, cap = {cap}")]
    OracleCap { n: usize, cap: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{path}:{line}: {message}")]
    MatrixMarket {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("invalid coloring: subdomains {first} and {second} share color {color} but interact")]
    InvalidColoring {
        first: usize,
        second: usize,
        color: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("both members of pair ({0}, {1}) are unavailable")]
    PairFailure(usize, usize),

    #[error("redundant copy of subdomain {subdomain} on rank {host} is stale")]
    StaleCopy { subdomain: usize, host: usize },

    #[error("assumption A1 violated at iteration {iteration}: ranks {ranks:?} are simultaneously erroneous or failed")]
    A1Violation { iteration: usize, ranks: Vec<usize> },

    #[error("invalid fault schedule: {0}")]
    Schedule(String),

    #[error("iteration {got} does not advance past {last}")]
    NonMonotoneIteration { last: usize, got: usize },

    #[error("iteration diverged: relative residual {relres:e} at iteration {iteration}")]
    Divergence { iteration: usize, relres: f64 },

    #[error("decomposition hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("comparison of mismatched runs: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

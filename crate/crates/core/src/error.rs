use thiserror::Error;

/// Errors produced by the estimators, solvers and generators in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sparsity k = {k} is out of range for dimension d = {d}")]
    SparsityOutOfRange { k: usize, d: usize },

    #[error("epsilon = {0} is outside [0, 1/2)")]
    InvalidEpsilon(f64),

    #[error("epsilon = {0} exceeds the supported regime (at most 1/288); enable allow_large_epsilon to override")]
    EpsilonRegime(f64),

    #[error("spike vector must be a unit vector with at most {k} nonzeros")]
    InvalidSpike { k: usize },

    #[error("mean vector must have at most {k} nonzeros")]
    InvalidMean { k: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("input contains a non-finite value")]
    NonFinite,

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("feasible weight set is empty (n = {n}, epsilon = {epsilon})")]
    EmptyFeasibleSet { n: usize, epsilon: f64 },

    #[error("indeterminate: certified interval [{lower:.6}, {upper:.6}] straddles threshold {threshold:.6}")]
    Indeterminate { lower: f64, upper: f64, threshold: f64 },

    #[error("malformed sample file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

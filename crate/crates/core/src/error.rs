use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("value {value} outside [0, 1]")]
    Domain { value: f64 },

    #[error("invalid probability vector: {0}")]
    InvalidProbVector(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid stochastic matrix: {0}")]
    InvalidStochasticMatrix(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("measure is not invariant: max |(mu P)_y - mu_y| = {violation:e}")]
    NotInvariant { violation: f64 },

    #[error("state {state} has zero stationary mass; remove it from the system")]
    ZeroMassState { state: usize },

    #[error("no unique stationary measure: {0}; supply the stationary measure explicitly")]
    Stationary(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),

    #[error("{what}: {requested} exceeds cap {cap}")]
    CapExceeded {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

use thiserror::Error;

/// Errors raised by the model, the Shapley engine and the experiment harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("covariance matrix is not symmetric")]
    NotSymmetric,

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("observation contains a non-finite value at index {0}")]
    NonFinite(usize),

    #[error("coalition is empty")]
    EmptyCoalition,

    #[error("{n} sensors exceeds the limit of {max}")]
    UniverseTooLarge { n: usize, max: usize },

    #[error("sensor index {index} out of range for {n} sensors")]
    SensorOutOfRange { index: usize, n: usize },

    #[error("coalition cardinality {s_card} out of range for {n} sensors")]
    CardinalityOutOfRange { s_card: usize, n: usize },

    #[error("truncation predicate keeps no coalition")]
    EmptyKeptSet,

    #[error("invalid attack: {0}")]
    InvalidAttack(String),

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("threshold optimization needs both attacked and unattacked trials")]
    DegenerateLabels,
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the SLI model components.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SliError {
    #[error("insufficient neighbors: order {needed} requested but only {available} candidates")]
    InsufficientNeighbors { needed: usize, available: usize },

    #[error("zero bandwidth distance for query {index} (duplicate coordinates)")]
    ZeroBandwidthDistance { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("degenerate weights: the point set has no interacting pairs")]
    DegenerateWeights,

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is singular (zero pivot at {pivot})")]
    Singular { pivot: usize },

    #[error("negative determinant for a matrix expected to be positive definite")]
    NegativeDeterminant,

    #[error("collinear basis: the trend design matrix is rank deficient")]
    CollinearBasis,

    #[error("degenerate residuals: the detrended data vector is identically zero")]
    DegenerateResiduals,

    #[error("target {index} coincides with a sample point")]
    TargetInSampleSet { index: usize },

    #[error("degenerate correlation input: zero variance")]
    DegenerateCorrelation,

    #[error("objective is not finite at the initial point")]
    NonFiniteObjective,

    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    #[error("cross validation: {0}")]
    CrossValidation(String),
}

pub type Result<T> = std::result::Result<T, SliError>;

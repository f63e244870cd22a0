use thiserror::Error;

/// Errors raised by the estimation primitives and filters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("standard deviation of component {0} is zero")]
    ZeroVariance(usize),

    #[error("ballistic coefficient is zero")]
    ZeroBallisticCoefficient,

    #[error("degenerate sigma-point scaling: L + lambda = 0")]
    DegenerateScaling,

    #[error("information matrix is singular; state is unobservable")]
    Unobservable,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("{filter} diverged at step {step}: {reason}")]
    FilterDivergence {
        filter: String,
        step: usize,
        reason: String,
    },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<EstimationError>,
    },

    #[error("sigma point {index}: {source}")]
    SigmaPoint {
        index: usize,
        #[source]
        source: Box<EstimationError>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl EstimationError {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        EstimationError::DimensionMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        EstimationError::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, EstimationError>;

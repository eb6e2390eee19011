use thiserror::Error;

/// Validation and evaluation errors for duty computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DutyError {
    #[error("{name} must be within [0, 1], got {value}")]
    OutOfUnitRange { name: &'static str, value: f64 },

    #[error("{name} must be within [0, 1), got {value}")]
    OutOfHalfOpenRange { name: &'static str, value: f64 },

    #[error("{name} must be strictly positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("sequences must have equal length (got {left} and {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("at least {required} samples required, got {actual}")]
    TooFewSamples { required: usize, actual: usize },
}

use thiserror::Error;

use crate::feature::ClassId;

/// Errors produced by statistics, calibration, and harness operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("feature at index {0} has no positivity score")]
    MissingPositivity(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{name} out of range: {value} (expected {expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("base and novel class sets overlap on id {0}")]
    OverlappingClassSets(ClassId),

    #[error("unknown class id {0}")]
    UnknownClass(ClassId),

    #[error("class {0} is not a base class")]
    NotABaseClass(ClassId),

    #[error("base class {class} requires at least 2 samples, got {got}")]
    TooFewSamples { class: ClassId, got: usize },

    #[error("class {0} has no training samples")]
    EmptyClass(ClassId),

    #[error("feature labeled {got} cannot update stats for class {expected}")]
    ClassMismatch { expected: ClassId, got: ClassId },

    #[error(
        "covariance not factorizable at jitter {jitter:e}: smallest eigenvalue {min_eigenvalue:e}"
    )]
    NotFactorizable { jitter: f64, min_eigenvalue: f64 },

    #[error("covariance for class {0} contains non-finite entries")]
    NonFiniteCovariance(ClassId),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

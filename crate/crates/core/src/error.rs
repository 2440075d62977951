//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("volume geometry is invalid: {0}")]
    InvalidGeometry(&'static str),
    #[error("data length does not match grid dimensions")]
    DataLengthMismatch,
    #[error("mask values must be exactly 0 or 1")]
    InvalidMaskValue,
    #[error("intensity range is degenerate")]
    DegenerateIntensityRange,
    #[error("target slice count is smaller than the source")]
    TargetSmallerThanSource,
    #[error("mask dimensions differ")]
    DimMismatch,
    #[error("reference mask is empty")]
    EmptyReference,
    #[error("marginal distributions are degenerate")]
    DegenerateMarginals,
    #[error("brain mask is empty")]
    EmptyBrainMask,
    #[error("geometries are incompatible")]
    GeometryMismatch,
    #[error("displacement field contains non-finite values")]
    NonFiniteField,
    #[error("fewer than {required} nonzero paired differences (got {available})")]
    TooFewPairs { required: usize, available: usize },
    #[error("general-atlas quality is missing from the result")]
    MissingGeneralQuality,
    #[error("registration failed for every atlas")]
    AllRegistrationsFailed,
    #[error("input list is empty")]
    EmptyList,
}

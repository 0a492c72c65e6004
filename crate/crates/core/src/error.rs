use thiserror::Error;

use crate::volume::{Dims, Spacing};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("voxel sequence has length {actual}, dims require {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid dims {0:?}: every component must be >= 1")]
    BadDims([usize; 3]),
    #[error("invalid spacing {0:?}: every component must be finite and > 0")]
    BadSpacing([f64; 3]),
    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: Dims, right: Dims },
    #[error("spacing mismatch: {left} vs {right}")]
    SpacingMismatch { left: Spacing, right: Spacing },
    #[error("label value {value} outside the allowed set {{0, 1, 2}}")]
    LabelRange { value: f64 },
    #[error("negative dilation radius {0}")]
    NegativeRadius(f64),
    #[error("surface tolerance must be finite and > 0, got {0}")]
    BadTolerance(f64),

    #[error("bad NIfTI magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("truncated data: expected {expected} bytes, found {actual}")]
    TruncatedData { expected: usize, actual: usize },
    #[error("invalid NIfTI header: {0}")]
    InvalidHeader(String),
    #[error("dims {0} exceed the NIfTI-1 16-bit limit")]
    DimsTooLarge(Dims),
    #[error("sidecar schema error: {0}")]
    SchemaError(String),

    #[error("empty input")]
    EmptyInput,
    #[error("path point {point:?} lies outside volume {dims}")]
    PathOutOfBounds { point: [f64; 3], dims: Dims },
    #[error("invalid tree spec: {0}")]
    SpecInvalid(String),
    #[error("invalid sweep deltas: {0}")]
    BadDeltas(String),
    #[error("team {team:?} is missing metric {metric}")]
    MissingMetric { team: String, metric: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

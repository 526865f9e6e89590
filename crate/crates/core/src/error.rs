//! Error type shared across the crate, with the CLI exit-code mapping.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad NIfTI magic {found:?} in {path} (only single-file \"n+1\\0\" is supported)")]
    BadMagic { path: PathBuf, found: [u8; 4] },

    #[error("unsupported NIfTI datatype code {code} in {path} (supported: 2, 4, 512, 16)")]
    UnsupportedDatatype { path: PathBuf, code: i16 },

    #[error("malformed NIfTI header in {path}: {reason}")]
    BadHeader { path: PathBuf, reason: String },

    #[error("voxel count overflows addressable size in {path}: dims {dims:?}")]
    DimsOverflow { path: PathBuf, dims: [i16; 3] },

    #[error("truncated voxel payload in {path}: expected {expected} bytes, got {actual}")]
    TruncatedPayload {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("non-integer value {value} at voxel {index} in label file {path}")]
    NonIntegerLabel {
        path: PathBuf,
        index: usize,
        value: f64,
    },

    #[error("label value {value} at voxel {index} of {path} exceeds the 8-bit label range")]
    LabelOutOfRange {
        path: PathBuf,
        index: usize,
        value: f64,
    },

    #[error("probability value {value} at voxel {index} of {path} outside [0, 1] beyond tolerance")]
    ProbabilityOutOfRange {
        path: PathBuf,
        index: usize,
        value: f64,
    },

    #[error("label value {label} is not in the label semantics and is not background")]
    UnknownLabelValue { label: u8 },

    #[error("unknown class name {0:?} (expected et, ed or cavity)")]
    UnknownClassName(String),

    #[error("grid dims mismatch: {a:?} vs {b:?}")]
    DimsMismatch { a: [usize; 3], b: [usize; 3] },

    #[error("voxel spacing mismatch: {a:?} vs {b:?}")]
    SpacingMismatch { a: [f64; 3], b: [f64; 3] },

    #[error("invalid spacing ({dx}, {dy}, {dz}): all components must be finite and > 0")]
    InvalidSpacing { dx: f64, dy: f64, dz: f64 },

    #[error("invalid dims ({nx}, {ny}, {nz}): all dims must be >= 1")]
    InvalidDims { nx: usize, ny: usize, nz: usize },

    #[error("label buffer length {actual} does not match dims product {expected}")]
    LabelLengthMismatch { expected: usize, actual: usize },

    #[error("slice index {index} out of range (nz = {nz})")]
    SliceOutOfRange { index: usize, nz: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("oracle guard exceeded: slice region has {pixels} set pixels (limit {limit})")]
    OracleGuardExceeded { pixels: usize, limit: usize },

    #[error("ratings matrix invalid: {0}")]
    InvalidRatings(String),

    #[error("series is constant; rank correlation is undefined")]
    ConstantSeries,

    #[error("weights length {weights} does not match rater count {raters}")]
    WeightLengthMismatch { weights: usize, raters: usize },

    #[error("confidence level {0} out of range (expected 1..=4)")]
    ConfidenceOutOfRange(u8),

    #[error("manifest parse error: {0}")]
    ManifestParse(String),

    #[error("report serialization failed: {0}")]
    ReportSerialization(String),
}

impl Error {
    /// CLI exit code: 1 usage, 2 i/o, 3 format, 4 validation.
    /// Usage errors (1) and partial batch failures (5) are produced by the
    /// CLI layer directly and never pass through this type.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::BadMagic { .. }
            | Error::UnsupportedDatatype { .. }
            | Error::BadHeader { .. }
            | Error::DimsOverflow { .. }
            | Error::TruncatedPayload { .. }
            | Error::NonIntegerLabel { .. }
            | Error::LabelOutOfRange { .. }
            | Error::ManifestParse(_)
            | Error::ReportSerialization(_) => 3,
            _ => 4,
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("inconsistent joint count: {0}")]
    InconsistentJointCount(String),
    #[error("sequence has {0} frames, at least 2 are required")]
    EmptySequence(usize),
    #[error("segments {first:?} and {second:?} overlap")]
    OverlappingSegments { first: (usize, usize), second: (usize, usize) },
    #[error("segment {segment:?} is outside [0, {length})")]
    OutOfRangeSegment { segment: (usize, usize), length: usize },
    #[error("segment {0:?} has zero length")]
    ZeroLengthSegment((usize, usize)),
    #[error("scale reference distance {0:e} is degenerate")]
    DegenerateScale(f64),
    #[error("invalid joint index {index} for a skeleton with {joints} joints")]
    InvalidJointIndex { index: usize, joints: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("dimension mismatch: model expects {expected}, features have {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("head mismatch: expected {expected}, got {actual}")]
    HeadMismatch { expected: String, actual: String },
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("no segment pairs could be matched")]
    NoMatchedPairs,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("empty group: {0}")]
    EmptyGroup(String),
    #[error("too few samples: {samples} for {folds} folds")]
    TooFewSamples { samples: usize, folds: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// Innermost error, with any context layers stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Short machine-readable name of the innermost error.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::MalformedRow { .. } => "MalformedRow",
            Error::InconsistentJointCount(_) => "InconsistentJointCount",
            Error::EmptySequence(_) => "EmptySequence",
            Error::OverlappingSegments { .. } => "OverlappingSegments",
            Error::OutOfRangeSegment { .. } => "OutOfRangeSegment",
            Error::ZeroLengthSegment(_) => "ZeroLengthSegment",
            Error::DegenerateScale(_) => "DegenerateScale",
            Error::InvalidJointIndex { .. } => "InvalidJointIndex",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::HeadMismatch { .. } => "HeadMismatch",
            Error::NonFiniteGradient(_) => "NonFiniteGradient",
            Error::NonFinite(_) => "NonFinite",
            Error::NoMatchedPairs => "NoMatchedPairs",
            Error::EmptyInput(_) => "EmptyInput",
            Error::EmptyGroup(_) => "EmptyGroup",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::UnsupportedVersion(_) => "UnsupportedVersion",
            Error::Io { .. } => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
            Error::Context { .. } => unreachable!("root() strips context"),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.root() {
            Error::NonFiniteGradient(_) | Error::NonFinite(_) => ErrorClass::Numeric,
            Error::InvalidConfig(_) => ErrorClass::Usage,
            _ => ErrorClass::Data,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context_with(self, f: impl FnOnce() -> String) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context_with(self, f: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.context(f()))
    }
}

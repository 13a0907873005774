use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report. [`Error::code`] maps each variant
/// onto the closed set of machine-readable codes used by the CLI and the
/// HTTP service.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    NotFound(PathBuf),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt data: {0}")]
    CorruptData(String),
    #[error("probability value {value} at index {index} is outside [0,1]")]
    ValueOutOfRange { index: usize, value: f64 },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("rectangle ({x},{y},{w},{h}) exceeds {width}x{height} image")]
    OutOfBounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("could not place {0} after 1000 attempts; canvas too crowded")]
    PlacementFailed(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("negative or non-finite unary cost {value} at pixel {index}")]
    NegativeUnary { index: usize, value: f64 },
    #[error("mask has no foreground pixels")]
    EmptyForeground,
    #[error("mask has no background pixels")]
    EmptyBackground,
    #[error("window scale {scale} exceeds image dimension {limit}")]
    ScaleTooLarge { scale: usize, limit: usize },
    #[error("parse error on line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("requested rank {requested} exceeds maximum {max}")]
    RankTooHigh { requested: usize, max: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("evaluation set is missing the {0} class")]
    MissingClass(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotFound(_) => "NotFound",
            Error::UnsupportedFormat(_) => "UnsupportedFormat",
            Error::CorruptData(_) => "CorruptData",
            Error::ValueOutOfRange { .. } => "ValueOutOfRange",
            Error::Io(_) => "IoFailure",
            Error::OutOfBounds { .. } => "OutOfBounds",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::PlacementFailed(_) => "PlacementFailed",
            Error::EmptyInput(_) => "EmptyInput",
            Error::NegativeUnary { .. } => "NegativeUnary",
            Error::EmptyForeground => "EmptyForeground",
            Error::EmptyBackground => "EmptyBackground",
            Error::ScaleTooLarge { .. } => "ScaleTooLarge",
            Error::Parse { .. } => "ParseError",
            Error::RankTooHigh { .. } => "RankTooHigh",
            Error::SingleClass => "SingleClass",
            Error::MissingClass(_) => "MissingClass",
            Error::InvalidParam(_) => "InvalidParam",
        }
    }

    pub(crate) fn mismatch(expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn dims(expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            expected: format!("{}x{}", expected.0, expected.1),
            got: format!("{}x{}", got.0, got.1),
        }
    }
}

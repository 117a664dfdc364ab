//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "unsupported bit width {0}; supported widths are 1, 2, 4, 8 (and 32 for full precision)"
    )]
    UnsupportedBits(u32),

    #[error("invalid quantization levels: {0}")]
    InvalidLevels(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("layer {layer}: {reason}")]
    InvalidNetwork { layer: usize, reason: String },

    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty event stream")]
    EmptyStream,

    #[error("bad magic at offset 0: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated input at offset {offset}")]
    Truncated { offset: u64 },

    #[error("event record {record} at offset {offset}: coordinate ({x}, {y}) outside {width}x{height} sensor")]
    CoordinateOutOfRange {
        record: u64,
        offset: u64,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },

    #[error("event record {record} at offset {offset}: polarity {polarity} is not 0 or 1")]
    BadPolarity {
        record: u64,
        offset: u64,
        polarity: u8,
    },

    #[error("event record {record} at offset {offset}: timestamp {t} precedes previous timestamp {prev}")]
    TimestampRegression {
        record: u64,
        offset: u64,
        t: u32,
        prev: u32,
    },

    #[error("trailing bytes after offset {offset}")]
    TrailingBytes { offset: u64 },

    #[error("network spec hash mismatch: stored {stored}, computed {computed}")]
    HashMismatch { stored: String, computed: String },

    #[error(
        "layer {layer}: packed index {index} at position {position} is invalid for {levels} levels"
    )]
    IndexOutOfRange {
        layer: usize,
        position: u64,
        index: u32,
        levels: usize,
    },

    #[error("layer {0} is full precision; nothing to pack")]
    NothingToPack(usize),

    #[error("corrupt model file: {0}")]
    Corrupt(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

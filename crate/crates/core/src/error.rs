use std::io;

use thiserror::Error;

use crate::sparsity::ResidualCurve;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures reading or writing `.rcf` matrix files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected \"RCF1\"")]
    BadMagic { found: [u8; 4] },
    #[error("file too short for header ({len} bytes)")]
    ShortHeader { len: usize },
    #[error("zero dimension in header ({rows}x{cols})")]
    ZeroDimension { rows: u32, cols: u32 },
    #[error("payload truncated: expected {expected} bytes of values, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{extra} trailing bytes after payload")]
    TrailingBytes { extra: usize },
    #[error("non-finite value at offset {index}")]
    NonFinite { index: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("non-finite value at flat offset {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    /// The reference image makes a metric undefined (zero denominator).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("sparsity estimation failed: no residual knee above factor {knee_factor}")]
    EstimationFailed { knee_factor: f64, curve: ResidualCurve },
    #[error("format error: {0}")]
    Format(#[from] FormatError),
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Format(FormatError::Io(e))
    }
}

use thiserror::Error;

/// Errors raised while parsing the on-disk formats.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("truncated input: {0}")]
    Truncated(String),
    #[error("timestamps not sorted at record {index} ({prev} > {next})")]
    Unsorted { index: usize, prev: u64, next: u64 },
    #[error("map kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: u8, found: u8 },
    #[error("event {index} at ({x}, {y}) outside {width}x{height} sensor")]
    EventOutOfBounds {
        index: usize,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },
    #[error("record {index}: {msg}")]
    InvalidRecord { index: usize, msg: String },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("trailing bytes after payload ({0} extra)")]
    TrailingBytes(usize),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("pixel ({x}, {y}) outside {width}x{height} map")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("disparity must be positive, got {0}")]
    NonPositiveDisparity(f64),
    #[error("frame span is zero")]
    ZeroSpan,
    #[error("empty input: {0}")]
    Empty(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

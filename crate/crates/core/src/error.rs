use std::path::PathBuf;

/// Errors produced by the registration pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image stream: {0}")]
    CorruptStream(String),
    #[error("band index {index} out of range for a {bands}-band image")]
    BandOutOfRange { index: usize, bands: usize },
    #[error("image is {width}x{height}, need at least {min}x{min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sector count must be even and at least 2, got {0}")]
    OddSectorCount(usize),
    #[error("point ({dx:.3}, {dy:.3}) lies outside the descriptor disc")]
    OutsideDisc { dx: f64, dy: f64 },
    #[error("keypoint ({x}, {y}) is closer than {margin} px to the border of a {width}x{height} image")]
    BorderViolation {
        x: i64,
        y: i64,
        margin: usize,
        width: usize,
        height: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("registration failed: only {inliers} consistent matches")]
    RegistrationFailure { inliers: usize },
    #[error("degenerate point configuration, transform is singular")]
    Singular,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("encoding error: {0}")]
    Encode(String),
}

impl Error {
    /// True for the "not enough correct matches" outcome, which callers
    /// usually report differently from plumbing failures.
    pub fn is_registration_failure(&self) -> bool {
        matches!(self, Error::RegistrationFailure { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

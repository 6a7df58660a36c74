use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("band limit {requested} exceeds grid band limit {available}")]
    BandLimit { requested: usize, available: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("multipole range mismatch: {0}")]
    LmaxMismatch(String),

    #[error("invalid binning: {0}")]
    Binning(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("length mismatch: left has {left} bits, right has {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("streams share provenance source '{0}'; V and W must be independent")]
    NotIndependent(String),

    #[error("expected exactly {expected} bits, got {actual}")]
    WrongLength { expected: usize, actual: usize },

    #[error("key length {0} outside the supported range 1..=16")]
    KeyLength(usize),

    #[error("bit stream exhausted: at least {needed} bits needed, {available} available")]
    InsufficientBits { needed: usize, available: usize },

    #[error("pad exhausted: {requested} bits requested, {remaining} remaining (short by {shortfall})")]
    PadExhausted {
        requested: u64,
        remaining: u64,
        shortfall: u64,
    },

    #[error("pad offset {offset} already consumed (ledger at {consumed})")]
    LedgerConflict { offset: u64, consumed: u64 },

    #[error("key matrix is not a bijection: {0}")]
    NotBijective(String),

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = IoError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("not an EVSR binary file (bad magic)")]
    MagicMismatch,
    #[error("unsupported EVSR version {0}")]
    UnsupportedVersion(u16),
    #[error("file truncated: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: u64, found: u64 },
    #[error("{0} unexpected bytes after the last record")]
    TrailingBytes(u64),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Core(#[from] evsr_core::Error),
}

impl IoError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> IoError {
        let path = path.into();
        move |source| IoError::Io { path, source }
    }
}

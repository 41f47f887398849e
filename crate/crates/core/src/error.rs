//! Error type shared by the library. The CLI maps variants onto exit codes,
//! so the grouping here (I/O vs. format-version vs. schema) is part of the
//! external contract.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A line-oriented file failed to parse. `line` is 1-based.
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    /// A binary file stopped mid-record.
    #[error("{path}: truncated record at byte offset {offset}")]
    Truncated { path: PathBuf, offset: u64 },

    /// Magic/header string did not match the expected format version.
    #[error("{path}: bad header: expected {expected:?}, found {found:?}")]
    BadMagic {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("hint manifest carries {count} pc entries but the hint buffer holds {cap}")]
    HintCapacity { count: usize, cap: usize },

    #[error("{path}:{line}: duplicate pc 0x{pc:x}")]
    DuplicatePc { path: PathBuf, line: usize, pc: u64 },

    /// Report CSVs being joined disagree on their column layout.
    #[error("report schema mismatch: {msg}")]
    Schema { msg: String },

    #[error("invalid configuration: {msg}")]
    Config { msg: String },

    #[error("unsupported trace spec: {msg}")]
    Spec { msg: String },

    #[error("trace is empty")]
    EmptyTrace,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }
}

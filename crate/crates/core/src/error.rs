use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("maxout input must have even length, got {0}")]
    OddLength(usize),

    #[error("finite-difference step must be positive, got {0}")]
    BadEpsilon(f64),

    #[error("index {index} out of range for {what} of size {size}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("character {0:?} is not in the character vocabulary")]
    UnknownChar(char),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("bad checkpoint magic (expected \"DMNM\")")]
    BadMagic,

    #[error("unsupported checkpoint version {found} (this build reads {supported})")]
    BadVersion { found: u32, supported: u32 },

    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),

    #[error("checkpoint dims mismatch: {0}")]
    DimMismatch(String),

    #[error("checkpoint precision mismatch: file holds {found}-bit values, caller asked for {wanted}-bit")]
    PrecisionMismatch { found: u8, wanted: u8 },

    #[error("malformed {what} at line {line}: {detail}")]
    Parse {
        what: &'static str,
        line: usize,
        detail: String,
    },

    #[error("report metric sets differ: {0}")]
    MetricMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

//! Crate-wide error type.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Tensor shapes incompatible for the requested operation.
    Shape(String),
    /// Input outside an operation's mathematical domain (e.g. log of a
    /// non-positive value).
    Domain(String),
    /// A forward op or gradient produced NaN/Inf from finite inputs.
    NonFinite(String),
    /// Row or vocabulary index out of range.
    Index(String),
    /// Dataset line failed to parse or validate; line numbers are 1-based.
    Parse {
        line: usize,
        msg: String,
    },
    /// A domain-type invariant was violated.
    Invariant(String),
    /// Bad run configuration.
    Config(String),
    /// Checkpoint file rejected (version, checksum, truncation).
    Checkpoint(String),
    /// Training-loop failure (non-finite loss, degenerate batch, ...).
    Train(String),
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::Index(msg) => write!(f, "index error: {msg}"),
            Error::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            Error::Invariant(msg) => write!(f, "invariant violation: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
            Error::Train(msg) => write!(f, "training error: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
            Error::Json(err) => write!(f, "json error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            Error::Json(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Json(err)
    }
}

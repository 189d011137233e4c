use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    /// An operation would enumerate a carrier that is too large.
    #[error("size guard: {0}")]
    SizeGuard(String),
    /// A configured resource cap was exceeded.
    #[error("resource limit: {0}")]
    Resource(String),
    /// Ill-formed input wiring (unknown symbols, arity mismatches, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// A documented precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),
    /// Missing executables or other environment problems.
    #[error("environment error: {0}")]
    Environment(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, col, msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

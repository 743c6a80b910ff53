use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scene contains no visible geometry")]
    EmptyScene,

    #[error("parent cycle detected through objects: {}", .0.join(" -> "))]
    GraphCycle(Vec<String>),

    #[error("unknown parent `{parent}` referenced by `{child}`")]
    UnknownParent { child: String, parent: String },

    #[error("{pass} pass cannot draw this object: {reason}")]
    WrongPass { pass: &'static str, reason: String },

    #[error("pipeline assembly: {0}")]
    Assembly(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("scene schema error at `{pointer}`: {message}")]
    Schema { pointer: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: image codec error: {message}")]
    Image { path: PathBuf, message: String },

    #[error("{pass} pass failed: {source}")]
    Pass {
        pass: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: message.into() }
    }

    pub fn in_pass(self, pass: &'static str) -> Self {
        Error::Pass { pass, source: Box::new(self) }
    }

    /// True when the root cause is a filesystem failure rather than bad input.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Pass { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

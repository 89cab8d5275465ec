use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the mask selection and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("value error: {0}")]
    Value(String),

    #[error("metadata error: {0}")]
    Metadata(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("zero-norm secant between points {0} and {1} (duplicate points)")]
    ZeroSecant(usize, usize),

    #[error("degenerate clique at point {0}: all secant norms are zero")]
    DegenerateClique(usize),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error(
        "neighborhood graph is disconnected ({components} components); \
         rerun on the largest connected component"
    )]
    Disconnected { components: usize },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 1 input/parameter, 2 capacity, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Format(_)
            | Error::Value(_)
            | Error::Metadata(_)
            | Error::Parameter(_)
            | Error::ZeroSecant(..) => 1,
            Error::Capacity(_) => 2,
            Error::DegenerateClique(_)
            | Error::Disconnected { .. }
            | Error::UndefinedCorrelation(_)
            | Error::Numerical(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

//! Crate-wide error type.

use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("degenerate row {row} in {op}: norm {norm:e} below 1e-12")]
    DegenerateRow {
        op: &'static str,
        row: usize,
        norm: f64,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("training diverged: non-finite {component} at step {step}")]
    Divergence { component: &'static str, step: usize },

    #[error("degenerate cluster {cluster}: zero soft frequency")]
    DegenerateCluster { cluster: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Process exit code for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Validation(_) => 2,
            Error::Format { .. } | Error::Io(_) => 3,
            Error::Divergence { .. } | Error::NonFinite { .. } => 4,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }

    /// The innermost error beneath any stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn dim(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Dimension {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }
}

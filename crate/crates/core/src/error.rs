use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numeric core, the models and the data loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite value produced by {context}")]
    NonFinite { context: String },

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("backward requires a scalar (1x1) loss, got {rows}x{cols}")]
    NotScalar { rows: usize, cols: usize },

    #[error("backward already ran on this tape; record a new forward pass")]
    TapeConsumed,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("label vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty input")]
    EmptyInput,

    #[error("training diverged at epoch {epoch}: term `{term}` is not finite")]
    Divergence { epoch: usize, term: String },

    #[error("degenerate mixture component {component}: covariance collapsed {collapses} times")]
    DegenerateComponent { component: usize, collapses: usize },

    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row} has {found} columns, expected {expected}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("{path}: row {row}, column {col}: cannot parse `{cell}` as a number")]
    NonNumeric {
        path: PathBuf,
        row: usize,
        col: usize,
        cell: String,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::ShapeMismatch { op, left, right }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by input files rather than by numerics or configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::RaggedRow { .. }
                | Error::NonNumeric { .. }
                | Error::Format { .. }
                | Error::LengthMismatch(..)
                | Error::EmptyInput
        )
    }

    /// True for numerical breakdowns during optimisation.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::Divergence { .. }
                | Error::DegenerateComponent { .. }
                | Error::Singular(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

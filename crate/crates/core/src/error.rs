//! Error type shared by every module of the crate.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Mask stage that removed every grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskFilter {
    /// Magnitude percentile filter on the temporally averaged displacement norms.
    Magnitude,
    /// Direction-change filter on the per-point cosine range.
    DirectionChange,
    /// The two filters are individually non-empty but their intersection is empty.
    Intersection,
}

impl std::fmt::Display for MaskFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            MaskFilter::Magnitude => "magnitude",
            MaskFilter::DirectionChange => "direction-change",
            MaskFilter::Intersection => "intersection",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate mask: the {filter} filter left no active grid point")]
    DegenerateMask { filter: MaskFilter },

    #[error("numerical failure at iteration {iteration}: {detail}")]
    NumericalFailure { iteration: usize, detail: String },

    #[error("registration of frame pair {frame} failed: {source}")]
    FramePair {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            detail: detail.into(),
        }
    }
}

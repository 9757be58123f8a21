use std::path::PathBuf;

use thiserror::Error;

/// Every failure the toolkit reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ordering violation: {0}")]
    OrderingViolation(String),
    #[error("`{0}` must be positive")]
    NonPositive(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("skeleton invariant violated: {0}")]
    InvariantViolation(String),
    #[error("weighted attraction vectors cancel at node {node}")]
    DegenerateDirection { node: usize },
    #[error("skeleton is unsized; run the sizing pass first")]
    UnsizedSkeleton,
    #[error("mesh has no surface area to sample")]
    EmptyMesh,
    #[error("gaussian initialization needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("covariance is not positive definite")]
    SingularCovariance,
    #[error("mask has no foreground pixels")]
    EmptyForeground,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

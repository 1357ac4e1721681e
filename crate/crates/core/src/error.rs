use std::path::PathBuf;

use crate::spectral::Peak;

/// Errors produced across the estimation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid radar configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("target range {range} m is outside the unambiguous range (0, {max}) m")]
    BeyondUnambiguousRange { range: f64, max: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("only {} of {requested} peaks could be separated", found.len())]
    Unresolved { requested: usize, found: Vec<Peak> },

    #[error("covariance is rank deficient: {blocks} smoothing blocks for {required} required")]
    RankDeficient { blocks: usize, required: usize },

    #[error("amplitude system is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("non-finite {quantity} for target {target} at iteration {iteration}")]
    NonFiniteDerivative {
        quantity: &'static str,
        target: usize,
        iteration: usize,
    },

    #[error("Fisher information matrix is singular along {0}")]
    SingularFim(String),

    #[error("degenerate point geometry: {0}")]
    DegenerateGeometry(String),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("parse error: {0}")]
    Parse(String),

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

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Unresolved { .. }
                | Error::RankDeficient { .. }
                | Error::IllConditioned { .. }
                | Error::NonFiniteDerivative { .. }
                | Error::SingularFim(_)
                | Error::DegenerateGeometry(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

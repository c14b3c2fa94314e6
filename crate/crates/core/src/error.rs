//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix argument has the wrong shape.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// A computation that requires a Hurwitz matrix received one that is not.
    #[error("matrix is not Hurwitz: {0}")]
    NotHurwitz(String),

    /// A linear solve or eigendecomposition did not meet its tolerance.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A scalar argument is outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented operation precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An opt-in runtime check of a declared model bound failed.
    /// `bound` names the declared bound (e.g. the bounded-noise amplitude).
    #[error("assumption violated ({bound}): {detail}")]
    AssumptionViolation { bound: String, detail: String },

    /// The closed-loop state left the admissible region during integration.
    #[error("trajectory diverged at t = {t} (stream {stream_id})")]
    Divergence { t: f64, stream_id: u64 },

    /// An aggregation was asked to summarize zero trajectories.
    #[error("empty ensemble")]
    EmptyEnsemble,

    /// Trajectories passed to an aggregation do not share a time grid.
    #[error("mismatched time grids: {0}")]
    GridMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

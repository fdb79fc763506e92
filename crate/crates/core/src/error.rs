use thiserror::Error;

/// Errors surfaced by the numeric kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("angular score gradient is singular at the origin")]
    OriginSingularity,

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("truncation at m'={threshold} leaves no event mass")]
    InfeasibleThreshold { threshold: f64 },

    #[error("calibration bracket [{lo}, {hi}] does not straddle target {target} (attainable range [{at_lo}, {at_hi}])")]
    BracketFailure {
        lo: f64,
        hi: f64,
        target: f64,
        at_lo: f64,
        at_hi: f64,
    },

    #[error("retrieval target {target} above best attainable prefix mean {max_attainable}")]
    InfeasibleRetrievalTarget { target: f64, max_attainable: f64 },

    #[error("rejection budget {budget} exhausted after {accepted} of {requested} draws")]
    RejectionBudgetExhausted {
        budget: usize,
        accepted: usize,
        requested: usize,
    },

    #[error("scalar score law has zero mass above m={0}")]
    ZeroSurvival(f64),

    #[error("operation requires a 1-D density representation of the score law")]
    NeedsDensityLaw,

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("KL divergence is infinite where a finite value is required")]
    InfiniteKl,

    #[error("reverse trajectory {trajectory} diverged at step {step}")]
    TrajectoryDiverged { trajectory: usize, step: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("png encode: {0}")]
    Png(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

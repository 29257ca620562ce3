use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid kernel spec: {0}")]
    InvalidSpec(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("kernel is singular at the origin (alpha <= dim); use cell averaging")]
    SingularKernel,

    #[error("atom at {location:?} lies outside the grid cube")]
    AtomOutsideGrid { location: [f64; 3] },

    #[error("grid too coarse to resolve unit balls (h = {h}, need h < 0.25)")]
    GridTooCoarse { h: f64 },

    #[error(
        "solver did not converge: relative gap {gap:.3e} after {iterations} iterations (target {tol:.1e})"
    )]
    NonConvergence { gap: f64, iterations: usize, tol: f64 },

    #[error("candidate density is infeasible: worst constraint violation {violation:.3e}")]
    Infeasible { violation: f64 },

    #[error("witness rescale constant {c:.3} exceeds the quality threshold 100")]
    WitnessQuality { c: f64 },

    #[error("capacity solve failed at level {index} (t = {level:.6e}): {source}")]
    LevelSolveFailed {
        index: usize,
        level: f64,
        #[source]
        source: Box<CoreError>,
    },

    #[error("capacity solve failed on cover ball {index}: {source}")]
    BallSolveFailed {
        index: usize,
        #[source]
        source: Box<CoreError>,
    },

    #[error("skip budget exceeded: {skipped}/{total} samples skipped")]
    SkipBudget { skipped: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, CoreError>;

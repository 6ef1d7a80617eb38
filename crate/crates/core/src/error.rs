use thiserror::Error;

/// Every failure the engine can report. Halting conditions in a trajectory
/// are stored as values of this type rather than unwinding the run.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("point at distance {distance:.3e} lies outside the tube of half-width {sigma:.3e}")]
    OutOfTube { distance: f64, sigma: f64 },
    #[error("graph breakdown: {0}")]
    GraphBreakdown(String),
    #[error("infinite distance: mass discrepancy has nonzero integral {integral:.3e}")]
    InfiniteDistance { integral: f64 },
    #[error("degenerate distance: mass discrepancy vanishes")]
    Degenerate,
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("optimizer stalled after {iterations} iterations with projected gradient {gradient:.3e}")]
    NonConvergence {
        iterations: usize,
        gradient: f64,
        best: Vec<f64>,
    },
    #[error("step failure: {0}")]
    StepFailure(String),
    #[error("fixed-point backend failure: {0} (try the minimize backend)")]
    BackendFailure(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

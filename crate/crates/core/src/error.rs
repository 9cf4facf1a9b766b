use thiserror::Error;

/// Errors raised across the geometry, dynamics and scaling layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The spectral gap above the ground cluster fell below the configured floor.
    #[error("gap collapse: gap {gap:.3e} <= floor {floor:.3e} (near a critical point)")]
    GapCollapse { gap: f64, floor: f64 },

    #[error("ground state is {0}-fold degenerate; operation requires a nondegenerate ground state")]
    DegenerateGround(usize),

    #[error("projector rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),

    #[error("singular metric (condition number {0:.3e})")]
    SingularMetric(f64),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("critical point on path at s = {s:.6} (gap {gap:.3e})")]
    CriticalPointOnPath { s: f64, gap: f64 },

    #[error("non-integrable singularity: {0}")]
    NonIntegrableSingularity(String),

    #[error("step limit exceeded: {steps} steps, error estimate {estimate:.3e}")]
    StepLimitExceeded { steps: usize, estimate: f64 },

    #[error("mesh too coarse: refinement changed result by {0:.3e}")]
    MeshTooCoarse(f64),

    #[error("frame degeneration at s = {0:.6}: transported frame lost rank")]
    FrameDegeneration(f64),

    #[error("degenerate Jordan-Wigner mode {mode} (denominator {denominator:.3e})")]
    DegenerateMode { mode: usize, denominator: f64 },

    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("non-positive data in power-law fit at index {0}")]
    NonPositiveData(usize),

    #[error("quadrature not converged: tail estimate {0:.3e}")]
    QuadratureNotConverged(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "InvalidModel",
            Error::InvalidInput(_) => "InvalidInput",
            Error::NumericalFailure(_) => "NumericalFailure",
            Error::GapCollapse { .. } => "GapCollapse",
            Error::DegenerateGround(_) => "DegenerateGround",
            Error::RankMismatch(..) => "RankMismatch",
            Error::SingularMetric(_) => "SingularMetric",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::CriticalPointOnPath { .. } => "CriticalPointOnPath",
            Error::NonIntegrableSingularity(_) => "NonIntegrableSingularity",
            Error::StepLimitExceeded { .. } => "StepLimitExceeded",
            Error::MeshTooCoarse(_) => "MeshTooCoarse",
            Error::FrameDegeneration(_) => "FrameDegeneration",
            Error::DegenerateMode { .. } => "DegenerateMode",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::NonPositiveData(_) => "NonPositiveData",
            Error::QuadratureNotConverged(_) => "QuadratureNotConverged",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("level {level} out of range for a mode of dimension {dim}")]
    LevelOutOfRange { level: usize, dim: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("truncation tail {tail:.3e} exceeds tolerance {tol:.3e} at dimension {dim}")]
    Truncation { tail: f64, tol: f64, dim: usize },

    #[error("state is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("projection has vanishing weight {0:.3e}")]
    ZeroWeight(f64),

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("integrator failed at t = {t}: {reason}")]
    StepSize { t: f64, reason: String },

    #[error("precision loss estimating f_{n}: evaluations {first} and {second} disagree by {rel:.3e} (relative)")]
    PrecisionLoss {
        n: usize,
        first: f64,
        second: f64,
        rel: f64,
    },

    #[error("concurrence maximum for N = {n} is not at gt = pi/4 (grid value {grid} at gt = {gt}, pi/4 value {quarter})")]
    MaximizerMismatch {
        n: usize,
        gt: f64,
        grid: f64,
        quarter: f64,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// True for failures that stem from a numerical tolerance rather than
    /// from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite
                | Error::Numerical(_)
                | Error::StepSize { .. }
                | Error::PrecisionLoss { .. }
                | Error::MaximizerMismatch { .. }
        )
    }
}

use thiserror::Error;

/// Errors produced by the core library.
///
/// Variants fall into three groups: rejected inputs (bad dimensions,
/// tolerance violations, out-of-range arguments), model limitations
/// (non-diagonalizable Lindblad operators, singular schedules), and
/// integration-quality failures detected mid-propagation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: deviation {deviation:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("vectors are not orthonormal: deviation {deviation:.3e} exceeds tolerance {tol:.3e}")]
    NotOrthonormal { deviation: f64, tol: f64 },

    #[error("not a density matrix: {reason}")]
    NotDensity { reason: String },

    #[error("time {t} outside schedule horizon [0, {t_max}]")]
    OutsideHorizon { t: f64, t_max: f64 },

    #[error("derivative is ambiguous exactly at table knot t = {t}")]
    DerivativeAtKnot { t: f64 },

    #[error("invalid schedule: {reason}")]
    InvalidSchedule { reason: String },

    #[error("rate schedule evaluates to {value:.3e} < 0 at t = {t}")]
    NegativeRate { t: f64, value: f64 },

    #[error("invalid time grid: {reason}")]
    InvalidGrid { reason: String },

    #[error("invalid model: {reason}")]
    InvalidModel { reason: String },

    #[error("time grids do not match ({left} vs {right} samples)")]
    GridMismatch { left: usize, right: usize },

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("integration quality failure at step {step}: {what}")]
    IntegrationQuality { step: usize, what: String },

    #[error("{name} is not diagonalizable: eigenvector condition number {cond:.3e}")]
    NotDiagonalizable { name: String, cond: f64 },

    #[error("bases do not split the operator: lower-left block norm {norm:.3e}")]
    NotInvariantSubspace { norm: f64 },

    #[error("schedule magnitude {value:.3e} below {min:.3e} at t = {t}")]
    SingularSchedule { t: f64, value: f64, min: f64 },

    #[error("zero coefficient vector: eigenvectors are not determined")]
    ZeroBloch,

    #[error("linear algebra backend failure: {0}")]
    Backend(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PamError {
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid regularization: eps = {0} must be positive")]
    InvalidRegularization(f64),
    #[error("quadrature did not converge: {0}")]
    QuadratureNonconvergent(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error("eigensolver did not converge after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("input not normalized: squared norm {0}")]
    UnnormalizedInput(f64),
    #[error("hermitian symmetry violated: max defect {0:e}")]
    SymmetryViolation(f64),
    #[error("unsupported initial data: {0}")]
    UnsupportedInitialData(String),
    #[error("overflow guard triggered: {saturated} saturated samples")]
    OverflowGuard { saturated: usize },
    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("quadrature order too high: {0}")]
    OrderTooHigh(String),
    #[error("chaos series not converging: term ratio {0:.4} >= 0.9")]
    SeriesNotConverging(f64),
    #[error("undetermined tail exponents: {0}")]
    UndeterminedTails(String),
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),
    #[error("negative variational value: {0}")]
    NegativeEn(f64),
}

pub type Result<T> = std::result::Result<T, PamError>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report. Variants carry enough context to
/// explain themselves in a log line.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("density is not positive (min {min:e} at point {index})")]
    NonPositiveDensity { min: f64, index: usize },
    #[error("right-hand side has non-zero mean {mean:e} (tolerance {tol:e})")]
    NonZeroMean { mean: f64, tol: f64 },
    #[error("J^2 + Id has max entry {residual:e}")]
    NotAlmostComplex { residual: f64 },
    #[error("omega and J are not compatible: max asymmetry of g is {asymmetry:e}")]
    NotCompatible { asymmetry: f64 },
    #[error("omega does not tame J: min eigenvalue of g is {min_eig:e}")]
    NotTaming { min_eig: f64 },
    #[error("omega is not closed: max |d omega| = {residual:e}")]
    NotAlmostKahler { residual: f64 },
    #[error("form is degenerate: {0}")]
    Degenerate(String),
    #[error("inconsistent right-hand side: weighted mean {mean:e} exceeds {tol:e}")]
    InconsistentRhs { mean: f64, tol: f64 },
    #[error("linear solve failed after {iterations} iterations (relative residual {residual:e})")]
    LinearSolveFailure { iterations: usize, residual: f64 },
    #[error("expected {expected} independent forms, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("omega' lost positivity (min density ratio {min_ratio:e})")]
    LostPositivity { min_ratio: f64 },
    #[error("Newton iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("continuity path stalled at t = {t} with step {dt:e}")]
    PathStalled { t: f64, dt: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),
    #[error("malformed field dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

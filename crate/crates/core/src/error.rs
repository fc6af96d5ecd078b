use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("covariance matrix is ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("operation requires a common covariance matrix")]
    UnsupportedModel,

    #[error("discriminant direction is the zero vector")]
    DegenerateRule,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("hard assignment left component {component} empty")]
    DegenerateAssignment { component: usize },

    #[error("optimizer did not converge after {iterations} iterations (best objective {best_objective})")]
    NonConvergence {
        iterations: usize,
        best_objective: f64,
        best_point: Vec<f64>,
    },

    #[error("quadrature did not converge after {refinements} refinements")]
    Quadrature { refinements: usize },

    #[error("information matrix is numerically singular (condition estimate {condition:.3e})")]
    NumericalRank { condition: f64 },

    #[error("experiment aborted: {failures} of {total} fits failed")]
    TooManyFailures { failures: usize, total: usize },
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: max |A - A^H| = {deviation:e} (tolerance {tolerance:e})")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("eigensolver did not converge for a {dim}x{dim} matrix")]
    ConvergenceFailure { dim: usize },

    #[error("linear system is singular or not positive definite (condition estimate {condition_estimate:e})")]
    SingularMatrix { condition_estimate: f64 },

    #[error("matrix exponential argument too large: ||tM||_1 = {norm:e} exceeds {limit:e}")]
    OverflowRisk { norm: f64, limit: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "quadratic Hamiltonian coefficients are not symmetric (max |c_ij - c_ji| = {deviation:e})"
    )]
    NonSymmetricQuadraticCoefficients { deviation: f64 },

    #[error("quorum is not informationally complete: {reason}")]
    SingularQuorum {
        reason: String,
        min_eigenvalue: f64,
        condition_number: f64,
    },

    #[error("vectors belong to different quorums")]
    QuorumMismatch,

    #[error("mixing parameter {0} outside [0, 1]")]
    LambdaOutOfRange(f64),

    #[error("{0}")]
    MethodUnsupported(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invariant violated: {what} (deviation {deviation:e}, tolerance {tolerance:e})")]
    InvariantViolation {
        what: &'static str,
        deviation: f64,
        tolerance: f64,
    },
}

impl Error {
    /// True for failures caused by the numbers rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ConvergenceFailure { .. }
                | Error::SingularMatrix { .. }
                | Error::OverflowRisk { .. }
                | Error::SingularQuorum { .. }
                | Error::InvariantViolation { .. }
        )
    }
}

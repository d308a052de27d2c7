use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("row {row} of the dispersal matrix sums to {sum:e}, expected 0")]
    NonZeroRowSum { row: usize, sum: f64 },
    #[error("negative off-diagonal dispersal rate at ({row}, {col}): {value:e}")]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    #[error("dispersal matrix is reducible: patch {unreachable} cannot be reached from every patch")]
    Reducible { unreachable: usize },
    #[error("stationary system is singular beyond rank one")]
    SingularBeyondRankOne,
    #[error("dispersal matrix is not reversible (detailed balance violated by {violation:e})")]
    NotReversible { violation: f64 },
    #[error("covariance matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("covariance matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("correlation {rho} outside the admissible interval ({lower}, 1)")]
    BadCorrelation { rho: f64, lower: f64 },
    #[error("dispersal and covariance matrices do not commute (max deviation {deviation:e})")]
    NotCommuting { deviation: f64 },
    #[error("singular system is inconsistent (residual {residual:e})")]
    InconsistentSystem { residual: f64 },
    #[error("adaptive quadrature did not converge: estimated error {error:e} after {intervals} intervals")]
    QuadratureFailure { error: f64, intervals: usize },
    #[error("projection moved the patch distribution by {shift} at t = {time}; reduce dt")]
    StepTooLarge { time: f64, shift: f64 },
    #[error("occupation moments are undefined without dispersal")]
    DegenerateNoDispersal,
    #[error("mode {mode} must satisfy 1 <= mode < n/2 (n = {n})")]
    BadMode { mode: usize, n: usize },
    #[error("group has only the trivial character")]
    TrivialOnlySpectrum,
    #[error("dispersal profile has a non-negative eigenvalue {value:e} on a nontrivial character")]
    NonNegativeCharacterRate { value: f64 },
    #[error("group of order {order} exceeds the configured limit {limit}")]
    GroupTooLarge { order: usize, limit: usize },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

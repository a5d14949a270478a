//! Crate-wide error type.

use crate::gramfactor::GramFactor;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Dimensions of an operand disagree with the partition or with another operand.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A diagonal block failed the Hermitian tolerance check.
    #[error("diagonal block {index} is not Hermitian (deviation {deviation:.3e} > {bound:.3e})")]
    NotHermitianDiagonal {
        index: usize,
        deviation: f64,
        bound: f64,
    },

    /// Two module vectors do not share a partition / module rank.
    #[error("partition mismatch: {0}")]
    PartitionMismatch(String),

    /// A block index is outside the partition (or violates i != j where required).
    #[error("block index out of range: ({i}, {j}) for {n} blocks")]
    IndexOutOfRange { i: usize, j: usize, n: usize },

    /// The Hermitian eigensolver or SVD did not converge.
    #[error("eigensolver failed to converge")]
    EigenFailure,

    /// A diagonal block has an eigenvalue below the PSD tolerance.
    #[error("diagonal block {block} is not PSD (min eigenvalue {min_eig:.6e})")]
    DiagonalNotPsd { block: usize, min_eig: f64 },

    /// A regularized Schur pivot is numerically singular; the regularization
    /// is too small relative to the conditioning of the chain.
    #[error("singular Schur pivot at block {index} (epsilon {epsilon:.3e})")]
    SingularPivot { index: usize, epsilon: f64 },

    /// The matrix has an eigenvalue below the clip band of the PSD square root.
    #[error("matrix is not PSD within the clip tolerance (min eigenvalue {min_eig:.6e}, bound {bound:.6e})")]
    NotPsd { min_eig: f64, bound: f64 },

    /// A tentative factor column exceeded the norm threshold; the cross-entry
    /// bounds appear to fail numerically.
    #[error("cross-bound violation at block ({row}, {col}): column norm {norm:.6e}")]
    CrossBoundViolation { row: usize, col: usize, norm: f64 },

    /// The factorization residual stayed above tolerance after the whole
    /// schedule; the best factor found is carried in the payload.
    #[error("factorization residual {residual:.6e} did not reach tolerance")]
    ResidualNotConverged {
        residual: f64,
        factor: Box<GramFactor>,
    },

    /// A vector passed where a unit vector is required is not normalized.
    #[error("not a unit vector (norm {norm:.12})")]
    NotUnitVector { norm: f64 },

    /// The operator is zero, so the Schwarz constant is undefined.
    #[error("zero operator: all quotients are 0/0")]
    ZeroOperator,

    /// A diagonal operator that must be invertible is singular at working precision.
    #[error("singular diagonal operator: {0}")]
    SingularDiagonal(&'static str),

    /// The cross-entry constant is outside [0, 1).
    #[error("gamma {gamma} is outside [0, 1): arbitrarily large off-diagonals destroy positivity")]
    GammaOutOfRange { gamma: f64 },

    /// The coercivity certificate failed its own eigenvalue self-check.
    /// This would contradict the gap bound and must be surfaced loudly.
    #[error("certificate refused: lambda_min(H) = {lambda_min:.12e} < delta = {delta:.12e} (gamma = {gamma:.6})")]
    CertificateRefused {
        lambda_min: f64,
        delta: f64,
        gamma: f64,
    },

    /// The claimed particular solution fails its own residual check.
    #[error("X0 is not a solution: residual {residual:.6e} exceeds tolerance {tol:.6e}")]
    NotASolution { residual: f64, tol: f64 },

    /// A generator spec or configuration value is invalid.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// An input file does not match the published schema.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

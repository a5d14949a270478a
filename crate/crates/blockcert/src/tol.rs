//! Fixed numerical tolerances shared across the crate.
//!
//! Every threshold used by the library is defined here so that the
//! certificates, the factorization, and the test suites agree on what
//! "positive", "Hermitian", and "singular" mean numerically.

/// Hermitian deviation tolerance, relative to `1 + max-entry`.
/// Inputs are rejected when `||M - M*||_max` exceeds this times `1 + ||M||_max`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// An eigenvalue counts as nonnegative when it is at least
/// `-PSD_EIG_TOL * max(1, ||T||_2)`.
pub const PSD_EIG_TOL: f64 = 1e-8;

/// Reported worst cross-entry ratios must be reproducible from their stored
/// witness within this tolerance.
pub const WITNESS_REPRO_TOL: f64 = 1e-10;

/// Denominators below this are treated as vanishing; the quotient convention
/// then returns infinity.
pub const DENOM_FLOOR: f64 = 1e-30;

/// Certification slack on cross-entry ratio comparisons against 1. Kept well
/// below `PSD_EIG_TOL` so a certificate never outruns the eigenvalue oracle.
pub const RATIO_CERT_TOL: f64 = 1e-10;

/// Relative numerical-rank cutoff: singular values at or below
/// `RANK_TOL * sigma_1` are treated as zero.
pub const RANK_TOL: f64 = 1e-8;

/// Eigenvalues of a PSD diagonal block at or below `KERNEL_TOL * max(1, ||T||_2)`
/// are treated as kernel directions when whitening cross entries.
pub const KERNEL_TOL: f64 = 1e-10;

/// A Schur pivot with an eigenvalue of magnitude below
/// `SINGULAR_PIVOT_FLOOR * max(1, ||T||_2)` cannot be safely inverted.
pub const SINGULAR_PIVOT_FLOOR: f64 = 1e-13;

/// Singular values below this absolute floor are treated as exactly zero when
/// forming condition numbers (the condition number becomes infinite).
pub const CONDITION_ZERO_FLOOR: f64 = 1e-30;

/// Default residual / rank tolerance used by the command-line front end.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Default regularization schedule used by the command-line front end.
pub const DEFAULT_EPS_SCHEDULE: [f64; 4] = [1e-2, 1e-4, 1e-6, 1e-8];

/// Default factor column-norm threshold is this factor times `max(1, ||T||_2)`.
pub const COLUMN_THRESHOLD_FACTOR: f64 = 1e6;

//! Coercivity and spectral-gap certificates for self-adjoint 2x2 block
//! operators `H = [[A, B], [B*, C]]`.
//!
//! With `A >= a I`, `C >= c I` and the cross bound
//! `||<By, x>||^2 <= gamma <Ax, x> <Cy, y>` for some `gamma < 1`, the
//! operator satisfies `H >= delta I` with
//! `delta = min{a, c} (1 - sqrt(gamma))^2`, and the semigroup decays like
//! `||exp(-tH)|| <= exp(-delta t)`. The certificate never trusts the
//! algebra alone: it re-verifies `lambda_min(H) >= delta` against the
//! eigenvalue oracle on every run and refuses loudly otherwise.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, hermitian_eigen};
use crate::tol;

/// Blocks and declared lower bounds of a coercive pair.
#[derive(Debug, Clone)]
pub struct CoercivityInstance {
    a_op: DMatrix<Complex64>,
    b_op: DMatrix<Complex64>,
    c_op: DMatrix<Complex64>,
    a_bound: f64,
    c_bound: f64,
}

impl CoercivityInstance {
    /// Build with caller-supplied lower bounds `A >= a I`, `C >= c I`.
    /// The bounds are validated against the eigenvalue oracle, not trusted.
    pub fn new(
        a_op: DMatrix<Complex64>,
        b_op: DMatrix<Complex64>,
        c_op: DMatrix<Complex64>,
        a_bound: f64,
        c_bound: f64,
    ) -> Result<Self> {
        let d1 = a_op.nrows();
        let d2 = c_op.nrows();
        if a_op.ncols() != d1 || c_op.ncols() != d2 {
            return Err(Error::ShapeMismatch("A and C must be square".into()));
        }
        if b_op.nrows() != d1 || b_op.ncols() != d2 {
            return Err(Error::ShapeMismatch(format!(
                "B is {}x{}, expected {d1}x{d2}",
                b_op.nrows(),
                b_op.ncols()
            )));
        }
        for (name, m, idx) in [("A", &a_op, 0usize), ("C", &c_op, 1usize)] {
            let deviation = linalg::hermitian_deviation(m);
            let bound = tol::HERMITIAN_TOL * (1.0 + linalg::max_abs_entry(m));
            if deviation > bound {
                let _ = name;
                return Err(Error::NotHermitianDiagonal { index: idx, deviation, bound });
            }
        }
        if a_bound <= 0.0 || c_bound <= 0.0 {
            return Err(Error::InvalidSpec("lower bounds a, c must be positive".into()));
        }
        let lam_a = hermitian_eigen(&a_op)?.min();
        if lam_a < a_bound - 1e-10 {
            return Err(Error::InvalidSpec(format!(
                "declared bound a = {a_bound} exceeds lambda_min(A) = {lam_a}"
            )));
        }
        let lam_c = hermitian_eigen(&c_op)?.min();
        if lam_c < c_bound - 1e-10 {
            return Err(Error::InvalidSpec(format!(
                "declared bound c = {c_bound} exceeds lambda_min(C) = {lam_c}"
            )));
        }
        Ok(Self { a_op, b_op, c_op, a_bound, c_bound })
    }

    /// Default the bounds to `lambda_min(A)` and `lambda_min(C)`.
    pub fn with_default_bounds(
        a_op: DMatrix<Complex64>,
        b_op: DMatrix<Complex64>,
        c_op: DMatrix<Complex64>,
    ) -> Result<Self> {
        let lam_a = hermitian_eigen(&a_op)?.min();
        let lam_c = hermitian_eigen(&c_op)?.min();
        if lam_a <= 0.0 {
            return Err(Error::SingularDiagonal("A is not positive definite"));
        }
        if lam_c <= 0.0 {
            return Err(Error::SingularDiagonal("C is not positive definite"));
        }
        Self::new(a_op, b_op, c_op, lam_a, lam_c)
    }

    pub fn a_op(&self) -> &DMatrix<Complex64> {
        &self.a_op
    }

    pub fn b_op(&self) -> &DMatrix<Complex64> {
        &self.b_op
    }

    pub fn c_op(&self) -> &DMatrix<Complex64> {
        &self.c_op
    }

    pub fn a_bound(&self) -> f64 {
        self.a_bound
    }

    pub fn c_bound(&self) -> f64 {
        self.c_bound
    }

    /// Assemble `H = [[A, B], [B*, C]]`.
    pub fn assemble_h(&self) -> DMatrix<Complex64> {
        let d1 = self.a_op.nrows();
        let d2 = self.c_op.nrows();
        let mut h = DMatrix::zeros(d1 + d2, d1 + d2);
        h.view_mut((0, 0), (d1, d1)).copy_from(&self.a_op);
        h.view_mut((0, d1), (d1, d2)).copy_from(&self.b_op);
        h.view_mut((d1, 0), (d2, d1)).copy_from(&self.b_op.adjoint());
        h.view_mut((d1, d1), (d2, d2)).copy_from(&self.c_op);
        h
    }
}

/// The smallest `gamma` with `||<By, x>||^2 <= gamma <Ax, x> <Cy, y>` for all
/// `x, y`: exactly `||A^{-1/2} B C^{-1/2}||^2` by whitening and sharpness of
/// Cauchy-Schwarz.
pub fn gamma_exact(inst: &CoercivityInstance) -> Result<f64> {
    let eig_a = hermitian_eigen(inst.a_op())?;
    let eig_c = hermitian_eigen(inst.c_op())?;
    let floor_a = 1e-12 * eig_a.spectral_norm().max(1.0);
    let floor_c = 1e-12 * eig_c.spectral_norm().max(1.0);
    if eig_a.min() <= floor_a {
        return Err(Error::SingularDiagonal("A is not invertible at working precision"));
    }
    if eig_c.min() <= floor_c {
        return Err(Error::SingularDiagonal("C is not invertible at working precision"));
    }
    let a_inv_sqrt = eig_a.apply(|t| 1.0 / t.sqrt());
    let c_inv_sqrt = eig_c.apply(|t| 1.0 / t.sqrt());
    let whitened = a_inv_sqrt * inst.b_op() * c_inv_sqrt;
    let norm = linalg::spectral_norm(&whitened);
    Ok(norm * norm)
}

/// `delta = min{a, c} (1 - sqrt(gamma))^2`. Requires `0 <= gamma < 1`.
pub fn coercivity_delta(a: f64, c: f64, gamma: f64) -> Result<f64> {
    assert!(a > 0.0 && c > 0.0, "lower bounds must be positive");
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::GammaOutOfRange { gamma });
    }
    let factor = (1.0 - gamma.sqrt()).powi(2);
    Ok(a.min(c) * factor)
}

/// One decay check `(t, ||exp(-tH)||_2, exp(-delta t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCheck {
    pub t: f64,
    pub norm: f64,
    pub bound: f64,
}

/// A verified spectral-gap certificate.
#[derive(Debug, Clone)]
pub struct GapCertificate {
    pub gamma: f64,
    pub delta: f64,
    pub lambda_min_h: f64,
    pub decay_checks: Vec<DecayCheck>,
}

/// Matrix exponential `exp(-t H)` by Hermitian spectral calculus.
pub fn hermitian_exp(h_eig: &linalg::HermitianEigen, t: f64) -> DMatrix<Complex64> {
    h_eig.apply(|lam| (-t * lam).exp())
}

/// Assemble `H`, compute `gamma*` and `delta`, verify
/// `lambda_min(H) >= delta` against the oracle, and check the decay bound
/// `||exp(-tH)||_2 <= exp(-delta t)` at every grid point.
pub fn gap_certificate(inst: &CoercivityInstance, t_grid: &[f64]) -> Result<GapCertificate> {
    if t_grid.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidSpec("decay grid times must be nonnegative".into()));
    }
    let gamma = gamma_exact(inst)?;
    let delta = coercivity_delta(inst.a_bound(), inst.c_bound(), gamma)?;
    let h = inst.assemble_h();
    let h_eig = hermitian_eigen(&h)?;
    let lambda_min_h = h_eig.min();
    if lambda_min_h < delta - 1e-8 {
        return Err(Error::CertificateRefused { lambda_min: lambda_min_h, delta, gamma });
    }
    let mut decay_checks = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let expm = hermitian_exp(&h_eig, t);
        let norm = linalg::spectral_norm(&expm);
        let bound = (-delta * t).exp();
        if norm > bound * (1.0 + 1e-10) {
            return Err(Error::CertificateRefused { lambda_min: lambda_min_h, delta, gamma });
        }
        decay_checks.push(DecayCheck { t, norm, bound });
    }
    Ok(GapCertificate { gamma, delta, lambda_min_h, decay_checks })
}

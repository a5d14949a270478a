//! Dense complex linear-algebra helpers shared by all modules.
//!
//! Thin wrappers over nalgebra's Hermitian eigendecomposition and SVD that
//! fix an ordering (eigenvalues ascending, singular values descending) and
//! convert non-convergence into [`Error::EigenFailure`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_ITER: usize = 10_000;

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Real eigenvalues, ascending.
    pub values: Vec<f64>,
    /// Unitary matrix of eigenvectors; column `k` belongs to `values[k]`.
    pub vectors: DMatrix<Complex64>,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Spectral norm of the decomposed matrix, `max |lambda|`.
    pub fn spectral_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Reassemble `U f(Lambda) U*` for a scalar map `f` applied to the eigenvalues.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..d {
            let fk = Complex64::new(f(self.values[k]), 0.0);
            for r in 0..d {
                scaled[(r, k)] *= fk;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

/// Eigendecomposition of a Hermitian matrix. The strict upper triangle is
/// ignored in favor of the Hermitian part, so inputs that are Hermitian only
/// up to roundoff are handled consistently.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> Result<HermitianEigen> {
    assert_eq!(m.nrows(), m.ncols(), "hermitian_eigen requires a square matrix");
    let h = (m + m.adjoint()).scale(0.5);
    let se = nalgebra::linalg::SymmetricEigen::try_new(h, f64::EPSILON, MAX_ITER)
        .ok_or(Error::EigenFailure)?;
    let d = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

/// Thin SVD with singular values sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Singular values, descending; length `min(nrows, ncols)`.
    pub sigma: Vec<f64>,
    /// Left singular vectors, `nrows x min(nrows, ncols)`.
    pub u: DMatrix<Complex64>,
    /// Right singular vectors, `ncols x min(nrows, ncols)`.
    pub v: DMatrix<Complex64>,
}

impl Svd {
    pub fn top(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }

    /// Numerical rank: singular values strictly above `rel_tol * sigma_1`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let cut = rel_tol * self.top();
        self.sigma.iter().filter(|&&s| s > cut).count()
    }
}

pub fn svd(m: &DMatrix<Complex64>) -> Result<Svd> {
    let sv = nalgebra::linalg::SVD::try_new(m.clone(), true, true, f64::EPSILON, MAX_ITER)
        .ok_or(Error::EigenFailure)?;
    let u_raw = sv.u.ok_or(Error::EigenFailure)?;
    let vt_raw = sv.v_t.ok_or(Error::EigenFailure)?;
    let r = sv.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| sv.singular_values[b].total_cmp(&sv.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&k| sv.singular_values[k]).collect();
    let mut u = DMatrix::zeros(u_raw.nrows(), r);
    let mut v = DMatrix::zeros(vt_raw.ncols(), r);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &u_raw.column(src));
        v.set_column(dst, &vt_raw.row(src).adjoint());
    }
    Ok(Svd { sigma, u, v })
}

/// Spectral norm (largest singular value) of a general dense matrix.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    nalgebra::linalg::SVD::try_new(m.clone(), false, false, f64::EPSILON, MAX_ITER)
        .map(|sv| sv.singular_values.iter().fold(0.0f64, |a, &b| a.max(b)))
        .unwrap_or(f64::NAN)
}

/// Largest entry magnitude.
pub fn max_abs_entry(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// `||M - M*||_max`, the entrywise Hermitian deviation.
pub fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// Embed a real scalar as a complex matrix entry.
pub fn cx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Unit-normalize a complex vector. Returns `None` for the zero vector.
pub fn normalize(v: &DVector<Complex64>) -> Option<DVector<Complex64>> {
    let n = v.norm();
    if n == 0.0 {
        None
    } else {
        Some(v.unscale(n))
    }
}

//! Regularized block lower-triangular Gram factorization `T ~ X X*`.
//!
//! Diagonal factor blocks are principal square roots of the running pivot
//! (the Schur complement of everything already eliminated); ill-conditioned
//! pivots are shifted by a scheduled epsilon before taking the root. Column
//! entries follow `Y_ij = (T_ij - sum_{l<j} X_il X_jl*) D_j^{-1}` with a
//! pseudo-inverse applied on the regularized pivot. The residual
//! `||T - X X*||_2` is the arbiter: the factorization succeeds only when it
//! drops below the requested tolerance, otherwise the schedule advances.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::blockmat::BlockMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, cx, hermitian_eigen};
use crate::tol;

/// A strictly decreasing regularization schedule with a condition-number cap.
#[derive(Debug, Clone)]
pub struct RegularizationSchedule {
    eps: Vec<f64>,
    kappa_limit: f64,
    max_iterations: usize,
}

impl RegularizationSchedule {
    pub fn new(eps: Vec<f64>, kappa_limit: f64, max_iterations: usize) -> Result<Self> {
        if eps.is_empty() {
            return Err(Error::InvalidSpec("regularization schedule must be nonempty".into()));
        }
        if eps.iter().any(|&e| e <= 0.0) {
            return Err(Error::InvalidSpec("all scheduled epsilons must be positive".into()));
        }
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidSpec("schedule must be strictly decreasing".into()));
        }
        if kappa_limit <= 0.0 || max_iterations == 0 {
            return Err(Error::InvalidSpec(
                "kappa limit and max iterations must be positive".into(),
            ));
        }
        Ok(Self { eps, kappa_limit, max_iterations })
    }

    /// Default schedule for a residual tolerance `delta`: the standard
    /// epsilon ladder, condition cap `1/delta`, one pass per epsilon.
    pub fn default_for(delta: f64) -> Self {
        let eps: Vec<f64> = tol::DEFAULT_EPS_SCHEDULE.to_vec();
        let n = eps.len();
        Self::new(eps, 1.0 / delta, n).expect("default schedule is valid")
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn kappa_limit(&self) -> f64 {
        self.kappa_limit
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations
    }
}

/// A column whose tentative norm came near the failure threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdEvent {
    pub row: usize,
    pub col: usize,
    pub norm: f64,
}

/// Operation counters for one factorization pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    /// Dense principal square roots taken (one per block).
    pub sqrts: usize,
    /// Block-level matrix multiplications (column updates, pivot updates,
    /// and pseudo-inverse applications).
    pub block_mults: usize,
    /// Passes over the schedule until success or exhaustion.
    pub passes: usize,
}

/// The output of the factorization: `X` block lower-triangular with PSD
/// diagonal blocks, per-block regularizations, and the certified residual.
#[derive(Debug, Clone)]
pub struct GramFactor {
    partition: crate::blockmat::BlockPartition,
    /// Dense block lower-triangular factor; entries with `j > i` are exactly zero.
    pub x: DMatrix<Complex64>,
    /// Epsilon actually added to each pivot (0 when none).
    pub diagonal_regularizations: Vec<f64>,
    /// `||T - X X*||_2` of the factored input.
    pub residual_norm: f64,
    /// Columns whose tentative norm exceeded a tenth of the threshold.
    pub threshold_events: Vec<ThresholdEvent>,
    /// Counters for the successful (or best) pass.
    pub ops: OpCounts,
    /// Residual achieved by each pass, in pass order.
    pub residual_history: Vec<f64>,
}

impl GramFactor {
    pub fn partition(&self) -> &crate::blockmat::BlockPartition {
        &self.partition
    }

    /// Reassemble `X X*`.
    pub fn product(&self) -> DMatrix<Complex64> {
        &self.x * self.x.adjoint()
    }
}

/// Principal square root of a Hermitian PSD matrix via eigendecomposition.
///
/// Eigenvalues in `[-clip_tol * max(1, ||A||_2), 0)` are clipped to zero;
/// anything below that band is an error.
pub fn matrix_sqrt_psd(a: &DMatrix<Complex64>, clip_tol: f64) -> Result<DMatrix<Complex64>> {
    let eig = hermitian_eigen(a)?;
    let bound = clip_tol * eig.spectral_norm().max(1.0);
    let min_eig = eig.min();
    if min_eig < -bound {
        return Err(Error::NotPsd { min_eig, bound });
    }
    Ok(eig.apply(|t| t.max(0.0).sqrt()))
}

/// Default column-norm threshold `1e6 * max(1, ||T||_2)`.
pub fn default_column_threshold(t: &BlockMatrix) -> f64 {
    tol::COLUMN_THRESHOLD_FACTOR * t.scale()
}

struct PivotRoot {
    /// Eigenvectors of the (possibly shifted) pivot.
    vectors: DMatrix<Complex64>,
    /// Square roots of the clipped shifted eigenvalues.
    roots: Vec<f64>,
    eps_used: f64,
}

impl PivotRoot {
    fn root_matrix(&self) -> DMatrix<Complex64> {
        let d = self.roots.len();
        let mut scaled = self.vectors.clone();
        for k in 0..d {
            let r = cx(self.roots[k]);
            for row in 0..d {
                scaled[(row, k)] *= r;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    /// Apply `D^{-1}` on the right, inverting roots below `delta * ||D||` as zero.
    fn apply_inverse_right(&self, m: &DMatrix<Complex64>, delta: f64) -> DMatrix<Complex64> {
        let d = self.roots.len();
        let d_norm = self.roots.iter().fold(0.0f64, |a, &b| a.max(b));
        let floor = delta * d_norm;
        let mut inv_scaled = self.vectors.clone();
        for k in 0..d {
            let inv = if self.roots[k] > floor && self.roots[k] > 0.0 {
                1.0 / self.roots[k]
            } else {
                0.0
            };
            let z = cx(inv);
            for row in 0..d {
                inv_scaled[(row, k)] *= z;
            }
        }
        m * (&inv_scaled * self.vectors.adjoint())
    }
}

/// Condition number of the square-root factor built from shifted eigenvalues.
fn sqrt_condition(values: &[f64], eps: f64) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for &v in values {
        let root = (v + eps).max(0.0).sqrt();
        lo = lo.min(root);
        hi = hi.max(root);
    }
    if lo < tol::CONDITION_ZERO_FLOOR {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn pivot_root(
    values: &[f64],
    vectors: &DMatrix<Complex64>,
    schedule: &RegularizationSchedule,
    pass: usize,
) -> PivotRoot {
    let mut eps_used = 0.0;
    if sqrt_condition(values, 0.0) >= schedule.kappa_limit() {
        let candidates = &schedule.eps()[pass.min(schedule.eps().len() - 1)..];
        let mut chosen = None;
        for &e in candidates {
            if sqrt_condition(values, e) < schedule.kappa_limit() {
                chosen = Some(e);
                break;
            }
        }
        // Best effort when no scheduled epsilon reaches the cap: take the
        // candidate with the smallest condition number and let the residual
        // check arbitrate.
        eps_used = chosen.unwrap_or_else(|| {
            *candidates
                .iter()
                .min_by(|a, b| sqrt_condition(values, **a).total_cmp(&sqrt_condition(values, **b)))
                .expect("schedule is nonempty")
        });
    }
    let roots: Vec<f64> = values.iter().map(|&v| (v + eps_used).max(0.0).sqrt()).collect();
    PivotRoot { vectors: vectors.clone(), roots, eps_used }
}

/// Block lower-triangular Gram factorization with regularized pivots.
///
/// Preconditions: every diagonal block PSD within [`tol::PSD_EIG_TOL`],
/// `delta > 0`, `column_threshold > 0`.
pub fn gram_factor(
    t: &BlockMatrix,
    delta: f64,
    schedule: &RegularizationSchedule,
    column_threshold: f64,
) -> Result<GramFactor> {
    if delta <= 0.0 || column_threshold <= 0.0 {
        return Err(Error::InvalidSpec("delta and column threshold must be positive".into()));
    }
    let part = t.partition().clone();
    let n = part.block_count();
    let scale = t.scale();
    for i in 0..n {
        let eig = hermitian_eigen(&t.block(i, i).clone_owned())?;
        if eig.min() < -tol::PSD_EIG_TOL * scale {
            return Err(Error::DiagonalNotPsd { block: i, min_eig: eig.min() });
        }
    }

    let mut residual_history = Vec::new();
    let mut best: Option<GramFactor> = None;
    for pass in 0..schedule.max_iterations() {
        let mut x = DMatrix::<Complex64>::zeros(part.total(), part.total());
        let mut regs = vec![0.0; n];
        let mut events = Vec::new();
        let mut ops = OpCounts { sqrts: 0, block_mults: 0, passes: pass + 1 };
        let mut pivots: Vec<PivotRoot> = Vec::with_capacity(n);

        for i in 0..n {
            let (oi, di) = (part.offset(i), part.size(i));
            // Subdiagonal entries of row i; D_j comes from earlier blocks.
            for j in 0..i {
                let (oj, dj) = (part.offset(j), part.size(j));
                let mut s = t.block(i, j).clone_owned();
                for l in 0..j {
                    let (ol, dl) = (part.offset(l), part.size(l));
                    let xil = x.view((oi, ol), (di, dl));
                    let xjl = x.view((oj, ol), (dj, dl));
                    s -= xil * xjl.adjoint();
                    ops.block_mults += 1;
                }
                let y = pivots[j].apply_inverse_right(&s, delta);
                ops.block_mults += 1;
                let y_norm = linalg::spectral_norm(&y);
                if y_norm > column_threshold {
                    return Err(Error::CrossBoundViolation { row: i, col: j, norm: y_norm });
                }
                if y_norm > 0.1 * column_threshold {
                    events.push(ThresholdEvent { row: i, col: j, norm: y_norm });
                }
                x.view_mut((oi, oj), (di, dj)).copy_from(&y);
            }
            // Pivot: T_ii minus the contribution of the columns already built.
            let mut pivot = t.block(i, i).clone_owned();
            for l in 0..i {
                let (ol, dl) = (part.offset(l), part.size(l));
                let xil = x.view((oi, ol), (di, dl)).clone_owned();
                pivot -= &xil * xil.adjoint();
                ops.block_mults += 1;
            }
            let eig = hermitian_eigen(&pivot)?;
            let root = pivot_root(&eig.values, &eig.vectors, schedule, pass);
            regs[i] = root.eps_used;
            x.view_mut((oi, oi), (di, di)).copy_from(&root.root_matrix());
            ops.sqrts += 1;
            pivots.push(root);
        }

        let residual = t.entries() - &x * x.adjoint();
        let residual_norm = linalg::spectral_norm(&residual);
        residual_history.push(residual_norm);

        let factor = GramFactor {
            partition: part.clone(),
            x,
            diagonal_regularizations: regs,
            residual_norm,
            threshold_events: events,
            ops,
            residual_history: residual_history.clone(),
        };
        if residual_norm < delta {
            return Ok(factor);
        }
        if best.as_ref().map_or(true, |b| residual_norm < b.residual_norm) {
            best = Some(factor);
        }
    }

    let mut best = best.expect("at least one pass ran");
    best.residual_history = residual_history;
    Err(Error::ResidualNotConverged {
        residual: best.residual_norm,
        factor: Box::new(best),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use std::collections::BTreeMap;

    use crate::blockmat::BlockPartition;
    use crate::positivity::min_eig_oracle;
    use crate::testkit::{self, rng::Stream};

    #[test]
    fn sqrt_of_diagonal_and_identity() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![cx(4.0), cx(9.0)]));
        let r = matrix_sqrt_psd(&a, 1e-12).unwrap();
        assert!((r - DMatrix::from_diagonal(&DVector::from_vec(vec![cx(2.0), cx(3.0)]))).norm() < 1e-13);

        let i4 = DMatrix::<Complex64>::identity(4, 4);
        let r = matrix_sqrt_psd(&i4, 1e-12).unwrap();
        assert!((r - &i4).norm() < 1e-13);
    }

    #[test]
    fn sqrt_reconstructs_random_psd() {
        let mut st = Stream::new(23, "gram-sqrt", 0);
        for trial in 0..20 {
            let b = st.matrix(4, 4);
            let a = &b * b.adjoint();
            let r = matrix_sqrt_psd(&a, 1e-12).unwrap();
            let recon = &r * &r;
            let rel = linalg::spectral_norm(&(recon - &a)) / linalg::spectral_norm(&a).max(1e-300);
            assert!(rel < 1e-9, "trial {trial}: relative error {rel}");
        }
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![cx(1.0), cx(-0.5)]));
        assert!(matches!(matrix_sqrt_psd(&a, 1e-12), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn block_diagonal_factors_exactly() {
        let mut st = Stream::new(31, "gram-blockdiag", 0);
        let p = BlockPartition::new(vec![2, 3]).unwrap();
        let mut blocks = BTreeMap::new();
        for (i, &d) in [2usize, 3].iter().enumerate() {
            let b = st.matrix(d, d);
            blocks.insert((i, i), &b * b.adjoint());
        }
        let t = crate::blockmat::BlockMatrix::assemble(p, &blocks).unwrap();
        let schedule = RegularizationSchedule::default_for(1e-8);
        let f = gram_factor(&t, 1e-8, &schedule, default_column_threshold(&t)).unwrap();
        assert!(f.residual_norm < 1e-10);
        assert!(f.diagonal_regularizations.iter().all(|&e| e == 0.0));
        // Off-diagonal factor entries vanish for a decoupled input.
        assert!(linalg::spectral_norm(&(f.x.clone() - {
            let mut d = DMatrix::zeros(5, 5);
            d.view_mut((0, 0), (2, 2)).copy_from(&f.x.view((0, 0), (2, 2)).clone_owned());
            d.view_mut((2, 2), (3, 3)).copy_from(&f.x.view((2, 2), (3, 3)).clone_owned());
            d
        })) < 1e-12);
    }

    #[test]
    fn reference_matrix_meets_residual_tolerance() {
        let t = testkit::reference_rank_one_instance();
        let schedule = RegularizationSchedule::default_for(1e-8);
        let f = gram_factor(&t, 1e-8, &schedule, 1e6).unwrap();
        assert!(f.residual_norm <= 1e-8, "residual {}", f.residual_norm);
        assert!(f.diagonal_regularizations.iter().all(|&e| e == 0.0));
        let recomputed = linalg::spectral_norm(&(t.entries() - f.product()));
        assert!((recomputed - f.residual_norm).abs() <= 1e-10);
    }

    #[test]
    fn recovers_product_of_lower_triangular_factor() {
        let mut st = Stream::new(47, "gram-recover", 0);
        let p = BlockPartition::new(vec![2, 2, 3]).unwrap();
        let total = p.total();
        for trial in 0..10 {
            let mut xgen = DMatrix::<Complex64>::zeros(total, total);
            for i in 0..p.block_count() {
                for j in 0..=i {
                    let b = st.matrix(p.size(i), p.size(j));
                    let b = if i == j {
                        // Well-conditioned PSD diagonal root.
                        matrix_sqrt_psd(
                            &(&b * b.adjoint() + DMatrix::identity(p.size(i), p.size(i)).scale(0.5)),
                            1e-12,
                        )
                        .unwrap()
                    } else {
                        b.scale(0.3)
                    };
                    xgen.view_mut((p.offset(i), p.offset(j)), (p.size(i), p.size(j)))
                        .copy_from(&b);
                }
            }
            let tm = &xgen * xgen.adjoint();
            let t = crate::blockmat::BlockMatrix::from_dense(p.clone(), tm.clone()).unwrap();
            let schedule = RegularizationSchedule::default_for(1e-8);
            let f = gram_factor(&t, 1e-8, &schedule, default_column_threshold(&t)).unwrap();
            let rel = linalg::spectral_norm(&(tm.clone() - f.product())) / linalg::spectral_norm(&tm);
            assert!(rel <= 1e-9, "trial {trial}: relative residual {rel}");
        }
    }

    #[test]
    fn factor_structure_is_lower_triangular_with_psd_diagonal() {
        let t = testkit::reference_rank_one_instance();
        let schedule = RegularizationSchedule::default_for(1e-8);
        let f = gram_factor(&t, 1e-8, &schedule, 1e6).unwrap();
        let p = f.partition().clone();
        for i in 0..p.block_count() {
            for j in (i + 1)..p.block_count() {
                let blk = f
                    .x
                    .view((p.offset(i), p.offset(j)), (p.size(i), p.size(j)))
                    .clone_owned();
                assert!(blk.iter().all(|z| *z == cx(0.0)), "upper block ({i},{j}) not zero");
            }
            let d = f
                .x
                .view((p.offset(i), p.offset(i)), (p.size(i), p.size(i)))
                .clone_owned();
            assert!(linalg::hermitian_deviation(&d) < 1e-14);
            let eig = hermitian_eigen(&d).unwrap();
            assert!(eig.min() >= -1e-12);
        }
        // XX* stays PSD by construction.
        let xxs = crate::blockmat::BlockMatrix::from_dense(p, f.product()).unwrap();
        assert!(min_eig_oracle(&xxs).unwrap() >= -1e-10 * t.scale());
    }

    #[test]
    fn operation_counters_match_complexity_claim() {
        let mut st = Stream::new(59, "gram-ops", 0);
        for &n in &[2usize, 4, 6] {
            let sizes = vec![2usize; n];
            let p = BlockPartition::new(sizes).unwrap();
            let total = p.total();
            let g = st.matrix(total, total);
            let tm = &g * g.adjoint() + DMatrix::identity(total, total).scale(0.1);
            let t = crate::blockmat::BlockMatrix::from_dense(p, tm).unwrap();
            let schedule = RegularizationSchedule::default_for(1e-8);
            let f = gram_factor(&t, 1e-6, &schedule, default_column_threshold(&t)).unwrap();
            assert_eq!(f.ops.sqrts, n);
            assert!(
                f.ops.block_mults <= 2 * n * n,
                "n = {n}: {} block multiplications",
                f.ops.block_mults
            );
        }
    }

    #[test]
    fn cross_bound_violation_triggers_on_tiny_threshold() {
        let t = testkit::reference_rank_one_instance();
        let schedule = RegularizationSchedule::default_for(1e-8);
        match gram_factor(&t, 1e-8, &schedule, 1e-6) {
            Err(Error::CrossBoundViolation { norm, .. }) => assert!(norm > 1e-6),
            other => panic!("expected CrossBoundViolation, got {other:?}"),
        }
    }

    #[test]
    fn non_psd_diagonal_is_rejected() {
        let p = BlockPartition::new(vec![1, 1]).unwrap();
        let mut blocks = BTreeMap::new();
        blocks.insert((0, 0), DMatrix::from_element(1, 1, cx(-1.0)));
        blocks.insert((1, 1), DMatrix::from_element(1, 1, cx(1.0)));
        let t = crate::blockmat::BlockMatrix::assemble(p, &blocks).unwrap();
        let schedule = RegularizationSchedule::default_for(1e-8);
        assert!(matches!(
            gram_factor(&t, 1e-8, &schedule, 1e6),
            Err(Error::DiagonalNotPsd { .. })
        ));
    }

    #[test]
    fn indefinite_with_psd_diagonals_never_succeeds() {
        // PSD diagonal blocks, strongly indefinite couplings: success with a
        // small residual would certify near-positivity, so it must not happen.
        let mut st = Stream::new(71, "gram-failure-soundness", 0);
        for trial in 0..10 {
            let t = testkit::rng::indefinite_with_psd_diagonals(
                &mut st,
                &BlockPartition::new(vec![2, 2, 2]).unwrap(),
            );
            let delta = 1e-8;
            let lam = min_eig_oracle(&t).unwrap();
            assert!(lam < -10.0 * delta, "trial {trial}: generator check");
            let schedule = RegularizationSchedule::default_for(delta);
            match gram_factor(&t, delta, &schedule, default_column_threshold(&t)) {
                Ok(f) => panic!("trial {trial}: spurious success with residual {}", f.residual_norm),
                Err(Error::ResidualNotConverged { residual, .. }) => {
                    assert!(residual >= delta)
                }
                Err(Error::CrossBoundViolation { .. }) => {}
                Err(other) => panic!("unexpected error {other:?}"),
            }
        }
    }

    #[test]
    fn monotone_regularization_on_singular_diagonals() {
        // PSD inputs with singular diagonal blocks: the per-pass residual
        // should be nonincreasing as the schedule refines, for at least 95%
        // of seeded cases.
        let mut st = Stream::new(83, "gram-monotone", 0);
        let cases = 40;
        let mut monotone = 0;
        for trial in 0..cases {
            let t = testkit::rng::psd_with_singular_diagonals(
                &mut st,
                &BlockPartition::new(vec![2, 3]).unwrap(),
            );
            let schedule = RegularizationSchedule::default_for(1e-13);
            match gram_factor(&t, 1e-13, &schedule, default_column_threshold(&t)) {
                Ok(f) => {
                    if f.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)) {
                        monotone += 1;
                    }
                }
                Err(Error::ResidualNotConverged { factor, .. }) => {
                    if factor.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)) {
                        monotone += 1;
                    } else {
                        println!("trial {trial}: non-monotone history {:?}", factor.residual_history);
                    }
                }
                Err(other) => panic!("unexpected error {other:?}"),
            }
        }
        assert!(
            monotone * 100 >= cases * 95,
            "only {monotone}/{cases} cases monotone"
        );
    }

    #[test]
    fn strictly_positive_inputs_need_no_regularization() {
        let mut st = Stream::new(97, "gram-strict", 0);
        for _ in 0..15 {
            let p = BlockPartition::new(vec![2, 2, 2]).unwrap();
            let total = p.total();
            let g = st.matrix(total, total);
            let tm = &g * g.adjoint() + DMatrix::identity(total, total).scale(1e-2);
            let t = crate::blockmat::BlockMatrix::from_dense(p, tm).unwrap();
            let schedule = RegularizationSchedule::default_for(1e-8);
            let f = gram_factor(&t, 1e-8, &schedule, default_column_threshold(&t)).unwrap();
            assert!(f.diagonal_regularizations.iter().all(|&e| e == 0.0));
            assert!(f.residual_norm <= 1e-8);
        }
    }
}

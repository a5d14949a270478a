//! Mixed-Schwarz constants `C_{T,alpha}(f, g)` for factor pairs with
//! `f(t) g(t) = t`.
//!
//! The quotient `||<Tx, y>|| / (||f(|T|^alpha) x|| ||g(|T*|^alpha) y||)` is
//! evaluated by Hermitian functional calculus on the singular value data of
//! `T`: the scalar map `t -> f(t^alpha)` is applied to the singular values
//! directly, so one SVD serves every pair and every probe. The exact constant
//! is `sigma_1^(1-alpha)`, attained at the top singular pair and independent
//! of the admissible pair.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, Svd};
use crate::testkit::rng::Stream;
use crate::tol;

/// An operator together with the exponent `alpha in [0, 1]`.
#[derive(Debug, Clone)]
pub struct SchwarzProblem {
    pub t: DMatrix<Complex64>,
    pub alpha: f64,
}

impl SchwarzProblem {
    pub fn new(t: DMatrix<Complex64>, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidSpec(format!("alpha = {alpha} is outside [0, 1]")));
        }
        if t.nrows() == 0 || t.ncols() == 0 {
            return Err(Error::ShapeMismatch("operator must be nonempty".into()));
        }
        Ok(Self { t, alpha })
    }
}

/// A factor pair `(f, g)` with the multiplicative constraint `f(t) g(t) = t`.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorPair {
    /// `f(t) = t^s`, `g(t) = t^(1-s)`. Any real exponent is admissible; at
    /// `t = 0` the IEEE conventions `0^0 = 1`, `0^s = 0` (s > 0) and
    /// `0^s = inf` (s < 0) apply.
    PowerType { s: f64 },
    /// Piecewise-linear `f` through `(t, f(t))` nodes with `g(t) = t / f(t)`.
    /// Nodes require `t > 0` and `f(t) > 0`; the constraint holds exactly at
    /// every node.
    Tabulated { points: Vec<(f64, f64)> },
}

impl FactorPair {
    pub fn power(s: f64) -> Self {
        FactorPair::PowerType { s }
    }

    pub fn tabulated(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidSpec("tabulated pair needs at least one node".into()));
        }
        for &(t, f) in &points {
            if !(t > 0.0) || !(f > 0.0) || !t.is_finite() || !f.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "tabulated node (t = {t}, f = {f}) must be finite and positive"
                )));
            }
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidSpec("tabulated nodes must have distinct t".into()));
        }
        Ok(FactorPair::Tabulated { points })
    }

    /// Evaluate `f`.
    pub fn f(&self, t: f64) -> f64 {
        match self {
            FactorPair::PowerType { s } => t.powf(*s),
            FactorPair::Tabulated { points } => {
                if t <= 0.0 {
                    return 0.0;
                }
                interpolate(points, t)
            }
        }
    }

    /// Evaluate `g = t / f`.
    pub fn g(&self, t: f64) -> f64 {
        match self {
            FactorPair::PowerType { s } => t.powf(1.0 - *s),
            FactorPair::Tabulated { .. } => {
                if t <= 0.0 {
                    return 0.0;
                }
                let f = self.f(t);
                if f == 0.0 {
                    f64::INFINITY
                } else {
                    t / f
                }
            }
        }
    }
}

fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    match points.binary_search_by(|p| p.0.total_cmp(&t)) {
        Ok(k) => points[k].1,
        Err(0) => points[0].1,
        Err(k) if k == points.len() => points[points.len() - 1].1,
        Err(k) => {
            let (t0, f0) = points[k - 1];
            let (t1, f1) = points[k];
            let w = (t - t0) / (t1 - t0);
            f0 + w * (f1 - f0)
        }
    }
}

/// How a [`SchwarzResult`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchwarzMethod {
    ClosedForm,
    Sampled,
    Grid,
}

/// A constant value with the vectors attaining it.
#[derive(Debug, Clone)]
pub struct SchwarzResult {
    pub constant: f64,
    pub attaining_x: Option<DVector<Complex64>>,
    pub attaining_y: Option<DVector<Complex64>>,
    pub method: SchwarzMethod,
}

/// Precomputed `f(sigma_j^alpha)` / `g(sigma_j^alpha)` values for one pair.
#[derive(Debug, Clone)]
pub struct PreparedPair {
    f_vals: Vec<f64>,
    g_vals: Vec<f64>,
    f_zero: f64,
    g_zero: f64,
}

/// Singular-value data of one problem, reusable across pairs and probes.
#[derive(Debug, Clone)]
pub struct QuotientEvaluator {
    t: DMatrix<Complex64>,
    alpha: f64,
    svd: Svd,
}

impl QuotientEvaluator {
    pub fn new(problem: &SchwarzProblem) -> Result<Self> {
        let svd = linalg::svd(&problem.t)?;
        Ok(Self { t: problem.t.clone(), alpha: problem.alpha, svd })
    }

    pub fn sigma(&self) -> &[f64] {
        &self.svd.sigma
    }

    pub fn top_singular(&self) -> f64 {
        self.svd.top()
    }

    /// Right and left singular vectors `(v_k, u_k)`.
    pub fn singular_pair(&self, k: usize) -> (DVector<Complex64>, DVector<Complex64>) {
        (
            self.svd.v.column(k).clone_owned(),
            self.svd.u.column(k).clone_owned(),
        )
    }

    pub fn prepare(&self, pair: &FactorPair) -> PreparedPair {
        let a = self.alpha;
        let f_vals = self.svd.sigma.iter().map(|&s| pair.f(s.powf(a))).collect();
        let g_vals = self.svd.sigma.iter().map(|&s| pair.g(s.powf(a))).collect();
        let t_zero = 0.0f64.powf(a); // 1 when alpha = 0, else 0
        PreparedPair { f_vals, g_vals, f_zero: pair.f(t_zero), g_zero: pair.g(t_zero) }
    }

    fn side_norm(
        x: &DVector<Complex64>,
        basis: &DMatrix<Complex64>,
        vals: &[f64],
        zero_val: f64,
    ) -> f64 {
        let mut coef_sq_sum = 0.0;
        let mut den_sq = 0.0;
        let mut infinite = false;
        for (j, &fj) in vals.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..x.len() {
                acc += basis[(r, j)].conj() * x[r];
            }
            let c2 = acc.norm_sqr();
            coef_sq_sum += c2;
            if fj.is_infinite() {
                if c2 > 1e-60 {
                    infinite = true;
                }
            } else {
                den_sq += fj * fj * c2;
            }
        }
        let residual = (x.norm_squared() - coef_sq_sum).max(0.0);
        if zero_val.is_infinite() {
            if residual > 1e-60 {
                infinite = true;
            }
        } else {
            den_sq += zero_val * zero_val * residual;
        }
        if infinite {
            f64::INFINITY
        } else {
            den_sq.sqrt()
        }
    }

    /// The mixed-Schwarz quotient at unit vectors `(x, y)`.
    ///
    /// Returns `+inf` when the denominator vanishes (below
    /// [`tol::DENOM_FLOOR`]) and `0` when a factor value is infinite on a
    /// carried spectral component.
    pub fn quotient(
        &self,
        prep: &PreparedPair,
        x: &DVector<Complex64>,
        y: &DVector<Complex64>,
    ) -> Result<f64> {
        if x.len() != self.t.ncols() || y.len() != self.t.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "vectors of length {}, {} for a {}x{} operator",
                x.len(),
                y.len(),
                self.t.nrows(),
                self.t.ncols()
            )));
        }
        let nx = x.norm();
        if (nx - 1.0).abs() > 1e-10 {
            return Err(Error::NotUnitVector { norm: nx });
        }
        let ny = y.norm();
        if (ny - 1.0).abs() > 1e-10 {
            return Err(Error::NotUnitVector { norm: ny });
        }

        let tx = &self.t * x;
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..tx.len() {
            acc += tx[r].conj() * y[r];
        }
        let num = acc.norm();

        let den_x = Self::side_norm(x, &self.svd.v, &prep.f_vals, prep.f_zero);
        let den_y = Self::side_norm(y, &self.svd.u, &prep.g_vals, prep.g_zero);
        if den_x.is_infinite() || den_y.is_infinite() {
            return Ok(0.0);
        }
        let den = den_x * den_y;
        if den < tol::DENOM_FLOOR {
            Ok(f64::INFINITY)
        } else {
            Ok(num / den)
        }
    }

    /// Denominator product at `(x, y)`, used for nondegeneracy floors.
    pub fn denominator(
        &self,
        prep: &PreparedPair,
        x: &DVector<Complex64>,
        y: &DVector<Complex64>,
    ) -> f64 {
        let den_x = Self::side_norm(x, &self.svd.v, &prep.f_vals, prep.f_zero);
        let den_y = Self::side_norm(y, &self.svd.u, &prep.g_vals, prep.g_zero);
        den_x * den_y
    }
}

/// One-off quotient evaluation. For sweeps, build a [`QuotientEvaluator`]
/// once and reuse it.
pub fn schwarz_quotient(
    problem: &SchwarzProblem,
    pair: &FactorPair,
    x: &DVector<Complex64>,
    y: &DVector<Complex64>,
) -> Result<f64> {
    let ev = QuotientEvaluator::new(problem)?;
    let prep = ev.prepare(pair);
    ev.quotient(&prep, x, y)
}

/// The exact constant `sigma_1^(1-alpha)`, attained at the top singular pair
/// and independent of the admissible factor pair.
pub fn schwarz_constant_exact(problem: &SchwarzProblem) -> Result<SchwarzResult> {
    let ev = QuotientEvaluator::new(problem)?;
    let sigma1 = ev.top_singular();
    if sigma1 <= 0.0 {
        return Err(Error::ZeroOperator);
    }
    let (v1, u1) = ev.singular_pair(0);
    Ok(SchwarzResult {
        constant: sigma1.powf(1.0 - problem.alpha),
        attaining_x: Some(v1),
        attaining_y: Some(u1),
        method: SchwarzMethod::ClosedForm,
    })
}

/// Sampled constants over an exponent grid.
#[derive(Debug, Clone)]
pub struct SGridReport {
    /// `(s, estimated constant)` in grid order.
    pub entries: Vec<(f64, f64)>,
    /// Largest minus smallest estimate across the grid.
    pub spread: f64,
    /// Quotient evaluations skipped because the denominator vanished.
    pub skipped_infinite: usize,
}

/// Estimate the constant for each power exponent `s` by maximizing the
/// quotient over the singular-vector pairs and `samples` seeded unit-vector
/// pairs, and report the spread across the grid.
pub fn optimize_s(
    problem: &SchwarzProblem,
    s_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<SGridReport> {
    if s_grid.is_empty() {
        return Err(Error::InvalidSpec("s grid must be nonempty".into()));
    }
    let ev = QuotientEvaluator::new(problem)?;
    let mut probe_pairs: Vec<(DVector<Complex64>, DVector<Complex64>)> = Vec::new();
    for k in 0..ev.sigma().len() {
        probe_pairs.push(ev.singular_pair(k));
    }
    for idx in 0..samples {
        let mut st = Stream::new(seed, "schwarz-sample", idx as u64);
        let x = st.unit_vector(problem.t.ncols());
        let y = st.unit_vector(problem.t.nrows());
        probe_pairs.push((x, y));
    }

    let mut entries = Vec::with_capacity(s_grid.len());
    let mut skipped = 0usize;
    for &s in s_grid {
        let prep = ev.prepare(&FactorPair::power(s));
        let mut best = 0.0f64;
        for (x, y) in &probe_pairs {
            let q = ev.quotient(&prep, x, y)?;
            if q.is_infinite() {
                skipped += 1;
            } else {
                best = best.max(q);
            }
        }
        entries.push((s, best));
    }
    let hi = entries.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let lo = entries.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    Ok(SGridReport { entries, spread: hi - lo, skipped_infinite: skipped })
}

/// Effect of a norm-one perturbation on the exact constant.
#[derive(Debug, Clone)]
pub struct ContinuityReport {
    pub constant_t: f64,
    pub constant_s: f64,
    /// `|C_T - C_S|`.
    pub difference: f64,
    /// `||T - S||_2`.
    pub perturbation_norm: f64,
    /// Minimum denominator product over the probe set (nondegeneracy floor).
    pub denominator_floor: f64,
}

/// Draw a seeded perturbation `S = T + scale * E` with `||E||_2 = 1`, compute
/// both exact constants, and report the difference and the denominator floor.
pub fn continuity_probe(
    t: &DMatrix<Complex64>,
    perturbation_scale: f64,
    alpha: f64,
    pair: &FactorPair,
    seed: u64,
) -> Result<ContinuityReport> {
    if perturbation_scale < 0.0 {
        return Err(Error::InvalidSpec("perturbation scale must be nonnegative".into()));
    }
    let mut st = Stream::new(seed, "continuity", 0);
    let e_raw = st.matrix(t.nrows(), t.ncols());
    let e_norm = linalg::spectral_norm(&e_raw);
    let e = if e_norm > 0.0 { e_raw.unscale(e_norm) } else { e_raw };
    let s_mat = t + e.scale(perturbation_scale);

    let prob_t = SchwarzProblem::new(t.clone(), alpha)?;
    let prob_s = SchwarzProblem::new(s_mat.clone(), alpha)?;
    let c_t = schwarz_constant_exact(&prob_t)?.constant;
    let c_s = schwarz_constant_exact(&prob_s)?.constant;
    let difference = (c_t - c_s).abs();

    let ev_t = QuotientEvaluator::new(&prob_t)?;
    let ev_s = QuotientEvaluator::new(&prob_s)?;
    let sigma_gap = (ev_t.top_singular().powf(1.0 - alpha)
        - ev_s.top_singular().powf(1.0 - alpha))
    .abs();
    assert!(
        difference <= sigma_gap + 1e-10,
        "exact constants depend only on sigma_1"
    );

    let prep = ev_t.prepare(pair);
    let mut floor = f64::INFINITY;
    for k in 0..ev_t.sigma().len() {
        let (x, y) = ev_t.singular_pair(k);
        floor = floor.min(ev_t.denominator(&prep, &x, &y));
    }
    for idx in 0..8 {
        let mut st = Stream::new(seed, "continuity-floor", idx);
        let x = st.unit_vector(t.ncols());
        let y = st.unit_vector(t.nrows());
        floor = floor.min(ev_t.denominator(&prep, &x, &y));
    }

    Ok(ContinuityReport {
        constant_t: c_t,
        constant_s: c_s,
        difference,
        perturbation_norm: linalg::spectral_norm(&(s_mat - t)),
        denominator_floor: floor,
    })
}

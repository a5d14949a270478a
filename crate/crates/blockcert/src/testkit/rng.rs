//! Counter-based deterministic random streams.
//!
//! Every draw site opens its own [`Stream`] keyed by `(seed, purpose tag,
//! index)`, so adding new draw sites never perturbs existing streams and
//! results are identical regardless of evaluation order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::blockmat::{BlockMatrix, BlockPartition, ModuleVector};
use crate::linalg::{self, cx};

#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in tag.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// A splitmix64 stream keyed by `(seed, tag, index)`.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn new(seed: u64, tag: &str, index: u64) -> Self {
        let state = mix(mix(mix(seed) ^ fnv1a(tag)) ^ index);
        Self { state }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller (two uniforms per draw, no caching).
    pub fn normal(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Standard complex normal, `E|z|^2 = 1`.
    pub fn complex_normal(&mut self) -> Complex64 {
        let re = self.normal();
        let im = self.normal();
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    /// Dense matrix with iid standard complex normal entries, column-major
    /// fill order.
    pub fn matrix(&mut self, rows: usize, cols: usize) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m[(r, c)] = self.complex_normal();
            }
        }
        m
    }

    /// Column vector with iid standard complex normal entries.
    pub fn vector(&mut self, dim: usize) -> DVector<Complex64> {
        DVector::from_fn(dim, |_, _| self.complex_normal())
    }

    /// Unit vector uniform on the complex sphere.
    pub fn unit_vector(&mut self, dim: usize) -> DVector<Complex64> {
        loop {
            let v = self.vector(dim);
            if let Some(u) = linalg::normalize(&v) {
                return u;
            }
        }
    }

    /// A unitary matrix from the QR factorization of a Gaussian draw.
    pub fn unitary(&mut self, dim: usize) -> DMatrix<Complex64> {
        let g = self.matrix(dim, dim);
        nalgebra::linalg::QR::new(g).q()
    }
}

/// Module vector with iid Gaussian slot entries.
pub fn random_module_vector(
    stream: &mut Stream,
    partition: &BlockPartition,
    module_rank: usize,
) -> ModuleVector {
    let slots = (0..partition.block_count())
        .map(|i| stream.matrix(partition.size(i), module_rank))
        .collect();
    ModuleVector::new(partition.clone(), module_rank, slots).expect("shapes match by construction")
}

/// An indefinite Hermitian block matrix whose diagonal blocks are identity:
/// `T = I + s O` with `O` Hermitian, zero on the diagonal blocks, and `s`
/// chosen so the minimum eigenvalue lands near `-0.2`.
pub fn indefinite_with_psd_diagonals(
    stream: &mut Stream,
    partition: &BlockPartition,
) -> BlockMatrix {
    assert!(partition.block_count() >= 2, "needs at least two blocks");
    let total = partition.total();
    let mut off = DMatrix::<Complex64>::zeros(total, total);
    for i in 0..partition.block_count() {
        for j in 0..i {
            let b = stream.matrix(partition.size(i), partition.size(j));
            off.view_mut((partition.offset(i), partition.offset(j)), (partition.size(i), partition.size(j)))
                .copy_from(&b);
            off.view_mut((partition.offset(j), partition.offset(i)), (partition.size(j), partition.size(i)))
                .copy_from(&b.adjoint());
        }
    }
    let eig = linalg::hermitian_eigen(&off).expect("eigen of coupling");
    let lam_min = eig.min();
    assert!(lam_min < 0.0, "zero-diagonal coupling always has a negative eigenvalue");
    let s = 1.2 / (-lam_min);
    let mut entries = off.scale(s);
    for d in 0..total {
        entries[(d, d)] += cx(1.0);
    }
    BlockMatrix::from_dense(partition.clone(), entries).expect("hermitian by construction")
}

/// A PSD block matrix with singular diagonal blocks and genuine coupling:
/// `T = (1 - theta) blockdiag(S_i) + theta w w*` with each `S_i` rank
/// deficient and `w_i` in the range of `S_i` (so the diagonal kernels
/// survive the coupling).
pub fn psd_with_singular_diagonals(
    stream: &mut Stream,
    partition: &BlockPartition,
) -> BlockMatrix {
    let total = partition.total();
    let theta = 0.3;
    let mut entries = DMatrix::<Complex64>::zeros(total, total);
    let mut w = DVector::<Complex64>::zeros(total);
    for i in 0..partition.block_count() {
        let d = partition.size(i);
        let rank = d.saturating_sub(1);
        let s_i = if rank == 0 {
            DMatrix::zeros(d, d)
        } else {
            let g = stream.matrix(d, rank);
            &g * g.adjoint()
        };
        let r = stream.vector(d);
        let w_i = &s_i * r;
        for k in 0..d {
            w[partition.offset(i) + k] = w_i[k];
        }
        entries
            .view_mut((partition.offset(i), partition.offset(i)), (d, d))
            .copy_from(&s_i.scale(1.0 - theta));
    }
    for r in 0..total {
        for c in 0..total {
            entries[(r, c)] += w[r] * w[c].conj() * cx(theta);
        }
    }
    BlockMatrix::from_dense(partition.clone(), entries).expect("hermitian by construction")
}

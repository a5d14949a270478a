//! Partitioned complex Hermitian matrices, module-rank-k vectors, and their
//! matrix-valued inner products.
//!
//! A [`BlockMatrix`] stores one dense column-major array plus partition
//! offsets; blocks are views into that storage. A [`ModuleVector`] is a tuple
//! of `d_i x k` slot matrices whose pairing `<x, y> = sum_i x_i* y_i` takes
//! values in the `k x k` matrices; `k = 1` recovers ordinary scalars.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DMatrixView, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::tol;

/// Block dimensions `d_1..d_n` of a direct-sum decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl BlockPartition {
    /// Build a partition from block sizes. Every size must be at least 1 and
    /// there must be at least one block.
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::ShapeMismatch("partition must have at least one block".into()));
        }
        if sizes.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch("every block dimension must be >= 1".into()));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for &d in &sizes {
            offsets.push(total);
            total += d;
        }
        Ok(Self { sizes, offsets, total })
    }

    pub fn block_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    fn check_index(&self, i: usize, j: usize) -> Result<()> {
        let n = self.block_count();
        if i >= n || j >= n {
            return Err(Error::IndexOutOfRange { i, j, n });
        }
        Ok(())
    }
}

/// A dense complex Hermitian matrix with explicit block boundaries.
#[derive(Debug, Clone)]
pub struct BlockMatrix {
    partition: BlockPartition,
    entries: DMatrix<Complex64>,
    hermitian_checked: bool,
}

impl BlockMatrix {
    /// Assemble from the blocks on and below the diagonal (0-based indices,
    /// `i >= j`). Missing blocks are zero. Blocks above the diagonal are
    /// filled in as adjoints, so the result is Hermitian by construction.
    ///
    /// Diagonal blocks must be Hermitian within [`tol::HERMITIAN_TOL`].
    pub fn assemble(
        partition: BlockPartition,
        blocks: &BTreeMap<(usize, usize), DMatrix<Complex64>>,
    ) -> Result<Self> {
        let mut entries = DMatrix::zeros(partition.total(), partition.total());
        for (&(i, j), block) in blocks {
            partition.check_index(i, j)?;
            if i < j {
                return Err(Error::ShapeMismatch(format!(
                    "assemble takes only lower-triangular block keys, got ({i}, {j})"
                )));
            }
            let (di, dj) = (partition.size(i), partition.size(j));
            if block.nrows() != di || block.ncols() != dj {
                return Err(Error::ShapeMismatch(format!(
                    "block ({i}, {j}) is {}x{}, partition expects {di}x{dj}",
                    block.nrows(),
                    block.ncols()
                )));
            }
            if i == j {
                let deviation = linalg::hermitian_deviation(block);
                let bound = tol::HERMITIAN_TOL * (1.0 + linalg::max_abs_entry(block));
                if deviation > bound {
                    return Err(Error::NotHermitianDiagonal { index: i, deviation, bound });
                }
            }
            entries
                .view_mut((partition.offset(i), partition.offset(j)), (di, dj))
                .copy_from(block);
            if i != j {
                entries
                    .view_mut((partition.offset(j), partition.offset(i)), (dj, di))
                    .copy_from(&block.adjoint());
            }
        }
        // Mirror the strict lower triangle of diagonal blocks so the stored
        // matrix is exactly Hermitian even when inputs carry roundoff skew.
        for i in 0..partition.block_count() {
            let o = partition.offset(i);
            let d = partition.size(i);
            for r in 0..d {
                for c in 0..r {
                    let z = entries[(o + r, o + c)];
                    entries[(o + c, o + r)] = z.conj();
                }
                let diag = entries[(o + r, o + r)];
                entries[(o + r, o + r)] = Complex64::new(diag.re, 0.0);
            }
        }
        Ok(Self { partition, entries, hermitian_checked: true })
    }

    /// Wrap a dense matrix, checking the global Hermitian tolerance.
    pub fn from_dense(partition: BlockPartition, entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != partition.total() || entries.ncols() != partition.total() {
            return Err(Error::ShapeMismatch(format!(
                "matrix is {}x{}, partition total is {}",
                entries.nrows(),
                entries.ncols(),
                partition.total()
            )));
        }
        let deviation = linalg::hermitian_deviation(&entries);
        let bound = tol::HERMITIAN_TOL * (1.0 + linalg::max_abs_entry(&entries));
        if deviation > bound {
            return Err(Error::NotHermitianDiagonal { index: 0, deviation, bound });
        }
        Ok(Self { partition, entries, hermitian_checked: true })
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn hermitian_checked(&self) -> bool {
        self.hermitian_checked
    }

    pub fn total(&self) -> usize {
        self.partition.total()
    }

    pub fn block_count(&self) -> usize {
        self.partition.block_count()
    }

    /// View of block `(i, j)` into the dense storage.
    pub fn block(&self, i: usize, j: usize) -> DMatrixView<'_, Complex64> {
        self.entries.view(
            (self.partition.offset(i), self.partition.offset(j)),
            (self.partition.size(i), self.partition.size(j)),
        )
    }

    /// The regularized matrix `T + eps I`, which shifts every diagonal block
    /// by `eps I` (the diagonal blocks tile the whole diagonal).
    pub fn regularized(&self, eps: f64) -> BlockMatrix {
        let mut entries = self.entries.clone();
        for d in 0..entries.nrows() {
            entries[(d, d)] += Complex64::new(eps, 0.0);
        }
        BlockMatrix {
            partition: self.partition.clone(),
            entries,
            hermitian_checked: self.hermitian_checked,
        }
    }

    /// `max(1, ||T||_2)`, the scale used by relative tolerances.
    pub fn scale(&self) -> f64 {
        linalg::spectral_norm(&self.entries).max(1.0)
    }
}

/// A tuple of `d_i x k` complex slot matrices, one per block.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleVector {
    partition: BlockPartition,
    module_rank: usize,
    slots: Vec<DMatrix<Complex64>>,
}

impl ModuleVector {
    pub fn new(
        partition: BlockPartition,
        module_rank: usize,
        slots: Vec<DMatrix<Complex64>>,
    ) -> Result<Self> {
        if module_rank == 0 {
            return Err(Error::ShapeMismatch("module rank must be >= 1".into()));
        }
        if slots.len() != partition.block_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} slots supplied for {} blocks",
                slots.len(),
                partition.block_count()
            )));
        }
        for (i, slot) in slots.iter().enumerate() {
            if slot.nrows() != partition.size(i) || slot.ncols() != module_rank {
                return Err(Error::ShapeMismatch(format!(
                    "slot {i} is {}x{}, expected {}x{module_rank}",
                    slot.nrows(),
                    slot.ncols(),
                    partition.size(i)
                )));
            }
        }
        Ok(Self { partition, module_rank, slots })
    }

    /// Split a full-length column vector into a rank-1 module vector.
    pub fn from_full_vector(partition: BlockPartition, v: &DVector<Complex64>) -> Result<Self> {
        if v.len() != partition.total() {
            return Err(Error::ShapeMismatch(format!(
                "vector length {} does not match partition total {}",
                v.len(),
                partition.total()
            )));
        }
        let slots = (0..partition.block_count())
            .map(|i| {
                DMatrix::from_fn(partition.size(i), 1, |r, _| v[partition.offset(i) + r])
            })
            .collect();
        Self::new(partition, 1, slots)
    }

    /// Stack the slots into one `total x k` matrix.
    pub fn to_stacked(&self) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.partition.total(), self.module_rank);
        for (i, slot) in self.slots.iter().enumerate() {
            out.view_mut((self.partition.offset(i), 0), (slot.nrows(), self.module_rank))
                .copy_from(slot);
        }
        out
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn module_rank(&self) -> usize {
        self.module_rank
    }

    pub fn slot(&self, i: usize) -> &DMatrix<Complex64> {
        &self.slots[i]
    }

    pub fn slots(&self) -> &[DMatrix<Complex64>] {
        &self.slots
    }

    /// `<x, x>`, a PSD `k x k` matrix.
    pub fn gram(&self) -> DMatrix<Complex64> {
        let mut acc = DMatrix::zeros(self.module_rank, self.module_rank);
        for slot in &self.slots {
            acc += slot.adjoint() * slot;
        }
        acc
    }

    /// Module norm `||<x, x>||^(1/2)`.
    pub fn norm(&self) -> f64 {
        linalg::spectral_norm(&self.gram()).sqrt()
    }
}

/// `<x, y> = sum_i x_i* y_i`, conjugate-linear in the first argument.
pub fn inner_product(x: &ModuleVector, y: &ModuleVector) -> Result<DMatrix<Complex64>> {
    if x.partition != y.partition || x.module_rank != y.module_rank {
        return Err(Error::PartitionMismatch(
            "inner product requires matching partition and module rank".into(),
        ));
    }
    let mut acc = DMatrix::zeros(x.module_rank, x.module_rank);
    for (xs, ys) in x.slots.iter().zip(&y.slots) {
        acc += xs.adjoint() * ys;
    }
    Ok(acc)
}

/// A rank-one block `u v*`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneBlock {
    pub u: DVector<Complex64>,
    pub v: DVector<Complex64>,
}

impl RankOneBlock {
    pub fn new(u: DVector<Complex64>, v: DVector<Complex64>) -> Self {
        Self { u, v }
    }

    /// The outer product `u v*` as a dense matrix.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.u.len(), self.v.len());
        for r in 0..self.u.len() {
            for c in 0..self.v.len() {
                m[(r, c)] = self.u[r] * self.v[c].conj();
            }
        }
        m
    }

    /// Spectral norm `||u|| ||v||`.
    pub fn norm(&self) -> f64 {
        self.u.norm() * self.v.norm()
    }
}

/// `p_ij(x_i, x_j) = ||<T_ij x_j, x_i>||`, the spectral norm of the `k x k`
/// pairing `x_i* T_ij x_j` (modulus when `k = 1`).
pub fn cross_entry_value(
    t: &BlockMatrix,
    i: usize,
    j: usize,
    x_i: &DMatrix<Complex64>,
    x_j: &DMatrix<Complex64>,
) -> Result<f64> {
    let n = t.block_count();
    if i >= n || j >= n || i == j {
        return Err(Error::IndexOutOfRange { i, j, n });
    }
    let (di, dj) = (t.partition.size(i), t.partition.size(j));
    if x_i.nrows() != di || x_j.nrows() != dj || x_i.ncols() != x_j.ncols() || x_i.ncols() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "slot shapes {}x{} and {}x{} do not match blocks {di} and {dj} with a common rank",
            x_i.nrows(),
            x_i.ncols(),
            x_j.nrows(),
            x_j.ncols()
        )));
    }
    let pairing = x_i.adjoint() * t.block(i, j) * x_j;
    Ok(linalg::spectral_norm(&pairing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cx;
    use crate::testkit::rng::Stream;
    use crate::testkit::{self, rng};

    fn example_partition() -> BlockPartition {
        BlockPartition::new(vec![2, 2, 2]).unwrap()
    }

    #[test]
    fn assemble_single_block() {
        let p = BlockPartition::new(vec![1]).unwrap();
        let mut blocks = BTreeMap::new();
        blocks.insert((0, 0), DMatrix::from_element(1, 1, cx(2.0)));
        let t = BlockMatrix::assemble(p, &blocks).unwrap();
        assert_eq!(t.entries()[(0, 0)], cx(2.0));
        assert!(t.hermitian_checked());
    }

    #[test]
    fn assemble_identity_blocks() {
        let p = BlockPartition::new(vec![2, 2]).unwrap();
        let mut blocks = BTreeMap::new();
        blocks.insert((0, 0), DMatrix::identity(2, 2));
        blocks.insert((1, 1), DMatrix::identity(2, 2));
        let t = BlockMatrix::assemble(p, &blocks).unwrap();
        assert_eq!(t.entries(), &DMatrix::<Complex64>::identity(4, 4));
    }

    #[test]
    fn assemble_reference_matrix_mirrors_rank_one_blocks() {
        let t = testkit::reference_rank_one_instance();
        assert_eq!(t.total(), 6);
        // T_{21} must equal (u12 v12*)*.
        let u12 = DVector::from_vec(vec![cx(0.5), cx(0.3)]);
        let v12 = DVector::from_vec(vec![cx(0.4), cx(0.2)]);
        let expect = RankOneBlock::new(u12, v12).to_matrix().adjoint();
        assert_eq!(t.block(1, 0).clone_owned(), expect);
        let dev = linalg::hermitian_deviation(t.entries());
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn assemble_rejects_bad_shapes_and_non_hermitian_diagonals() {
        let p = example_partition();
        let mut blocks = BTreeMap::new();
        blocks.insert((0, 0), DMatrix::identity(3, 3));
        assert!(matches!(
            BlockMatrix::assemble(p.clone(), &blocks),
            Err(Error::ShapeMismatch(_))
        ));

        let mut blocks = BTreeMap::new();
        let mut skew = DMatrix::identity(2, 2);
        skew[(0, 1)] = cx(1.0);
        blocks.insert((0, 0), skew);
        assert!(matches!(
            BlockMatrix::assemble(p.clone(), &blocks),
            Err(Error::NotHermitianDiagonal { .. })
        ));

        let mut blocks = BTreeMap::new();
        blocks.insert((0, 1), DMatrix::identity(2, 2));
        assert!(BlockMatrix::assemble(p, &blocks).is_err());
    }

    #[test]
    fn block_round_trip_is_bit_exact() {
        let mut st = Stream::new(3, "blockmat-roundtrip", 0);
        let p = example_partition();
        let mut blocks = BTreeMap::new();
        for i in 0..3 {
            for j in 0..=i {
                let raw = st.matrix(2, 2);
                let b = if i == j { (&raw + raw.adjoint()).scale(0.5) } else { raw };
                blocks.insert((i, j), b);
            }
        }
        let t = BlockMatrix::assemble(p, &blocks).unwrap();
        for i in 0..3 {
            for j in 0..=i {
                if i == j {
                    // Diagonal blocks are canonicalized to be exactly Hermitian.
                    let got = t.block(i, j).clone_owned();
                    assert_eq!(got, got.adjoint());
                } else {
                    assert_eq!(t.block(i, j).clone_owned(), blocks[&(i, j)]);
                    assert_eq!(t.block(j, i).clone_owned(), blocks[&(i, j)].adjoint());
                }
            }
        }
    }

    #[test]
    fn inner_product_unit_and_identity_cases() {
        let p = BlockPartition::new(vec![3]).unwrap();
        let v = DVector::from_vec(vec![cx(1.0), cx(0.0), cx(0.0)]);
        let x = ModuleVector::from_full_vector(p, &v).unwrap();
        let ip = inner_product(&x, &x).unwrap();
        assert_eq!(ip[(0, 0)], cx(1.0));

        let p2 = BlockPartition::new(vec![2]).unwrap();
        let x2 = ModuleVector::new(p2, 2, vec![DMatrix::identity(2, 2)]).unwrap();
        assert_eq!(inner_product(&x2, &x2).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn inner_product_matches_columnwise_oracle() {
        // Brute-force oracle: entry (a, b) of <x, y> is the plain scalar inner
        // product of column a of the stacked x with column b of the stacked y.
        let p = BlockPartition::new(vec![2, 3]).unwrap();
        let mut st = Stream::new(17, "blockmat-ip-oracle", 0);
        let x = rng::random_module_vector(&mut st, &p, 2);
        let y = rng::random_module_vector(&mut st, &p, 2);
        let got = inner_product(&x, &y).unwrap();
        let xs = x.to_stacked();
        let ys = y.to_stacked();
        for a in 0..2 {
            for b in 0..2 {
                let mut acc = cx(0.0);
                for r in 0..p.total() {
                    acc += xs[(r, a)].conj() * ys[(r, b)];
                }
                assert!((got[(a, b)] - acc).norm() < 1e-12);
            }
        }
        // Conjugate symmetry.
        let yx = inner_product(&y, &x).unwrap();
        assert!((got.adjoint() - yx).norm() < 1e-14);
    }

    #[test]
    fn inner_product_rejects_partition_mismatch() {
        let xa = ModuleVector::new(BlockPartition::new(vec![2]).unwrap(), 1, vec![DMatrix::zeros(2, 1)]).unwrap();
        let xb = ModuleVector::new(BlockPartition::new(vec![3]).unwrap(), 1, vec![DMatrix::zeros(3, 1)]).unwrap();
        assert!(matches!(inner_product(&xa, &xb), Err(Error::PartitionMismatch(_))));
    }

    #[test]
    fn cross_entry_zero_block_and_scalar_case() {
        let p = BlockPartition::new(vec![2, 2]).unwrap();
        let mut blocks = BTreeMap::new();
        blocks.insert((0, 0), DMatrix::identity(2, 2));
        blocks.insert((1, 1), DMatrix::identity(2, 2));
        let t = BlockMatrix::assemble(p, &blocks).unwrap();
        let mut st = Stream::new(5, "blockmat-cross-zero", 0);
        let xi = st.matrix(2, 1);
        let xj = st.matrix(2, 1);
        assert_eq!(cross_entry_value(&t, 0, 1, &xi, &xj).unwrap(), 0.0);

        let p1 = BlockPartition::new(vec![1, 1]).unwrap();
        let mut blocks = BTreeMap::new();
        blocks.insert((0, 0), DMatrix::from_element(1, 1, cx(1.0)));
        blocks.insert((1, 1), DMatrix::from_element(1, 1, cx(1.0)));
        blocks.insert((1, 0), DMatrix::from_element(1, 1, cx(1.0)));
        let t1 = BlockMatrix::assemble(p1, &blocks).unwrap();
        let one = DMatrix::from_element(1, 1, cx(1.0));
        assert!((cross_entry_value(&t1, 0, 1, &one, &one).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cross_entry_reference_aligned_directions() {
        // For the rank-one block u v*, pairing along u/||u|| and v/||v|| gives
        // ||u|| ||v|| = sqrt(0.34) sqrt(0.20). Cross-checked against the dense
        // matrix product path inside cross_entry_value.
        let t = testkit::reference_rank_one_instance();
        let u = DVector::from_vec(vec![cx(0.5), cx(0.3)]);
        let v = DVector::from_vec(vec![cx(0.4), cx(0.2)]);
        let xi = DMatrix::from_fn(2, 1, |r, _| u[r] / cx(u.norm()));
        let xj = DMatrix::from_fn(2, 1, |r, _| v[r] / cx(v.norm()));
        let got = cross_entry_value(&t, 0, 1, &xi, &xj).unwrap();
        let expect = (0.34f64).sqrt() * (0.20f64).sqrt();
        assert!((got - expect).abs() < 1e-12, "got {got}, expect {expect}");
        assert!((expect - 0.260768).abs() < 1e-6);
    }

    #[test]
    fn cross_entry_rejects_diagonal_and_bad_ranks() {
        let t = testkit::reference_rank_one_instance();
        let x = DMatrix::zeros(2, 1);
        assert!(matches!(
            cross_entry_value(&t, 1, 1, &x, &x),
            Err(Error::IndexOutOfRange { .. })
        ));
        let bad = DMatrix::zeros(2, 2);
        assert!(cross_entry_value(&t, 0, 1, &x, &bad).is_err());
    }
}

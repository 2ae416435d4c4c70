//! Dense row-major complex matrices and the index arithmetic for applying a
//! small operator to selected qubits of a larger register.
//!
//! Qubit 0 is the most significant bit of a basis index throughout: basis
//! state `|b_0 b_1 … b_{N-1}⟩` has index `Σ b_q · 2^(N-1-q)`.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::{Error, Result};

// Supplies f64 math (sqrt, cos, ...) when no dependency pulls in std.
// Whenever std does enter the build graph (tests, std-enabled consumers),
// the inherent methods shadow these and the import goes unused.
#[allow(unused_imports)]
use num_traits::Float;

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl core::fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "CMatrix({}x{})", self.dim, self.dim)
    }
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        CMatrix { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                m.data[r * dim + c] = f(r, c);
            }
        }
        m
    }

    /// Build from row-major data; `data.len()` must be a perfect square.
    pub fn from_rows(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        Ok(CMatrix { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.dim + c] = v;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self.get(c, r).conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        CMatrix { dim: self.dim, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add_assign(&mut self, other: &CMatrix) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
    }

    /// Plain `self · other`. Used for construction-time checks and tests, not
    /// in the evolution hot path.
    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        debug_assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = CMatrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let row_b = &other.data[k * d..(k + 1) * d];
                let row_o = &mut out.data[i * d..(i + 1) * d];
                for j in 0..d {
                    row_o[j] += a * row_b[j];
                }
            }
        }
        out
    }

    /// Kronecker product `self ⊗ other` (self supplies the high-order bits).
    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let da = self.dim;
        let db = other.dim;
        let d = da * db;
        let mut out = CMatrix::zeros(d);
        for ra in 0..da {
            for ca in 0..da {
                let a = self.data[ra * da + ca];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for rb in 0..db {
                    for cb in 0..db {
                        out.data[(ra * db + rb) * d + (ca * db + cb)] = a * other.data[rb * db + cb];
                    }
                }
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .fold(0.0f64, f64::max)
            .sqrt()
    }

    /// `max |A - A†|` over entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for c in r..self.dim {
                let d = (self.get(r, c) - self.get(c, r).conj()).norm_sqr();
                worst = worst.max(d);
            }
        }
        worst.sqrt()
    }

    /// `max |U U† - I|` over entries.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.mul(&self.adjoint());
        prod.max_abs_diff(&CMatrix::identity(self.dim))
    }

    /// Left-multiply in place by `op` acting on the row fibers described by
    /// `tm`: `M ← (op ⊗ 1) M` with `op` embedded on `tm`'s target qubits.
    pub(crate) fn apply_left(&mut self, op: &CMatrix, tm: &TargetMap) {
        debug_assert_eq!(op.dim, tm.fiber_dim());
        debug_assert_eq!(self.dim, tm.total_dim);
        let dg = op.dim;
        let n = self.dim;
        const CHUNK: usize = 64;
        let mut scratch = vec![Complex64::new(0.0, 0.0); dg * CHUNK];
        for &r0 in &tm.rest {
            let mut c0 = 0;
            while c0 < n {
                let w = CHUNK.min(n - c0);
                for b in 0..dg {
                    let src = (r0 + tm.offs[b]) * n + c0;
                    scratch[b * CHUNK..b * CHUNK + w].copy_from_slice(&self.data[src..src + w]);
                }
                for a in 0..dg {
                    let dst = (r0 + tm.offs[a]) * n + c0;
                    let row_op = &op.data[a * dg..(a + 1) * dg];
                    for j in 0..w {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for b in 0..dg {
                            acc += row_op[b] * scratch[b * CHUNK + j];
                        }
                        self.data[dst + j] = acc;
                    }
                }
                c0 += w;
            }
        }
    }

    /// Right-multiply in place by `op†` on the column fibers: `M ← M (op† ⊗ 1)`.
    pub(crate) fn apply_right_adjoint(&mut self, op: &CMatrix, tm: &TargetMap) {
        debug_assert_eq!(op.dim, tm.fiber_dim());
        debug_assert_eq!(self.dim, tm.total_dim);
        let dg = op.dim;
        let n = self.dim;
        let mut scratch = vec![Complex64::new(0.0, 0.0); dg];
        for r in 0..n {
            let row = &mut self.data[r * n..(r + 1) * n];
            for &c0 in &tm.rest {
                for b in 0..dg {
                    scratch[b] = row[c0 + tm.offs[b]];
                }
                for a in 0..dg {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let row_op = &op.data[a * dg..(a + 1) * dg];
                    for b in 0..dg {
                        // (M op†)[r, c_a] = Σ_b M[r, c_b] · conj(op[a, b])
                        acc += scratch[b] * row_op[b].conj();
                    }
                    row[c0 + tm.offs[a]] = acc;
                }
            }
        }
    }

    /// Sparse variant of [`apply_left`]: `rows[a]` lists the nonzero
    /// `(b, op[a,b])` entries of row `a`.
    pub(crate) fn apply_left_sparse(&mut self, rows: &[Vec<(usize, Complex64)>], tm: &TargetMap) {
        debug_assert_eq!(rows.len(), tm.fiber_dim());
        let dg = rows.len();
        let n = self.dim;
        const CHUNK: usize = 64;
        let mut scratch = vec![Complex64::new(0.0, 0.0); dg * CHUNK];
        for &r0 in &tm.rest {
            let mut c0 = 0;
            while c0 < n {
                let w = CHUNK.min(n - c0);
                for b in 0..dg {
                    let src = (r0 + tm.offs[b]) * n + c0;
                    scratch[b * CHUNK..b * CHUNK + w].copy_from_slice(&self.data[src..src + w]);
                }
                for (a, row_op) in rows.iter().enumerate() {
                    let dst = (r0 + tm.offs[a]) * n + c0;
                    for j in 0..w {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for &(b, v) in row_op {
                            acc += v * scratch[b * CHUNK + j];
                        }
                        self.data[dst + j] = acc;
                    }
                }
                c0 += w;
            }
        }
    }

    /// Sparse variant of [`apply_right_adjoint`].
    pub(crate) fn apply_right_adjoint_sparse(
        &mut self,
        rows: &[Vec<(usize, Complex64)>],
        tm: &TargetMap,
    ) {
        debug_assert_eq!(rows.len(), tm.fiber_dim());
        let dg = rows.len();
        let n = self.dim;
        let mut scratch = vec![Complex64::new(0.0, 0.0); dg];
        for r in 0..n {
            let row = &mut self.data[r * n..(r + 1) * n];
            for &c0 in &tm.rest {
                for b in 0..dg {
                    scratch[b] = row[c0 + tm.offs[b]];
                }
                for (a, row_op) in rows.iter().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for &(b, v) in row_op {
                        acc += scratch[b] * v.conj();
                    }
                    row[c0 + tm.offs[a]] = acc;
                }
            }
        }
    }

    /// Pivoted Cholesky factorisation of a Hermitian PSD matrix:
    /// `self ≈ Σ_k col_k col_k†`, extracting columns while the largest
    /// remaining diagonal entry exceeds `pivot_floor`.
    ///
    /// Also serves as a positivity probe: for an indefinite matrix the
    /// elimination drives some residual diagonal entry clearly negative, which
    /// is reported in `min_residual_diag`.
    pub fn pivoted_cholesky(&self, pivot_floor: f64) -> PivotedCholesky {
        let d = self.dim;
        let mut res = self.clone();
        let mut cols: Vec<Vec<Complex64>> = Vec::new();
        for _ in 0..d {
            let mut p = 0;
            let mut best = f64::NEG_INFINITY;
            for i in 0..d {
                let v = res.get(i, i).re;
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= pivot_floor {
                break;
            }
            let norm = best.sqrt();
            let col: Vec<Complex64> = (0..d).map(|i| res.get(i, p) / norm).collect();
            for r in 0..d {
                for c in 0..d {
                    let v = res.get(r, c) - col[r] * col[c].conj();
                    res.set(r, c, v);
                }
            }
            cols.push(col);
        }
        let min_residual_diag =
            (0..d).map(|i| res.get(i, i).re).fold(f64::INFINITY, f64::min);
        PivotedCholesky { cols, min_residual_diag }
    }
}

/// Result of [`CMatrix::pivoted_cholesky`].
pub struct PivotedCholesky {
    /// Extracted factor columns (`self ≈ Σ col col†`).
    pub cols: Vec<Vec<Complex64>>,
    /// Most negative diagonal entry of the final residual; values below
    /// `-tol::PSD` indicate the input was not positive semidefinite.
    pub min_residual_diag: f64,
}

/// Precomputed scatter/gather indices for embedding a `k`-qubit operator on
/// qubits `targets` of an `n`-qubit space.
///
/// `offs[b]` places the `k` gate bits of `b` (gate qubit 0 = most significant)
/// at the register positions of `targets`; `rest` enumerates the base indices
/// with zeros at every target position.
pub(crate) struct TargetMap {
    total_dim: usize,
    offs: Vec<usize>,
    rest: Vec<usize>,
}

impl TargetMap {
    pub(crate) fn new(num_qubits: usize, targets: &[usize]) -> Result<Self> {
        let k = targets.len();
        if k == 0 || k > num_qubits {
            return Err(Error::DimensionMismatch { expected: num_qubits, got: k });
        }
        let mut mask = 0usize;
        for &t in targets {
            if t >= num_qubits {
                return Err(Error::QubitOutOfRange { qubit: t, num_qubits });
            }
            let bit = 1usize << (num_qubits - 1 - t);
            if mask & bit != 0 {
                return Err(Error::DuplicateTarget(t));
            }
            mask |= bit;
        }
        let dg = 1usize << k;
        let mut offs = vec![0usize; dg];
        for (b, off) in offs.iter_mut().enumerate() {
            let mut o = 0usize;
            for (j, &t) in targets.iter().enumerate() {
                if (b >> (k - 1 - j)) & 1 == 1 {
                    o |= 1usize << (num_qubits - 1 - t);
                }
            }
            *off = o;
        }
        let total_dim = 1usize << num_qubits;
        let mut rest = Vec::with_capacity(total_dim >> k);
        for i in 0..total_dim {
            if i & mask == 0 {
                rest.push(i);
            }
        }
        Ok(TargetMap { total_dim, offs, rest })
    }

    #[inline]
    pub(crate) fn fiber_dim(&self) -> usize {
        self.offs.len()
    }
}

//! Density matrices over qubit registers.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use rand::Rng;

use crate::qkernel::kraus::KrausChannel;
use crate::qkernel::matrix::{CMatrix, TargetMap};
use crate::qkernel::unitary::Unitary;
use crate::{tol, Error, Result};

// Supplies f64 math (sqrt, cos, ...) when no dependency pulls in std.
// Whenever std does enter the build graph (tests, std-enabled consumers),
// the inherent methods shadow these and the import goes unused.
#[allow(unused_imports)]
use num_traits::Float;

/// Mixed state of a qubit register. Constructors and checkpoints validate the
/// defining properties; the evolution methods themselves preserve them, so
/// per-gate revalidation (an O(d²) – O(d³) cost) is skipped.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    mat: CMatrix,
    num_qubits: usize,
}

impl DensityMatrix {
    /// Wrap a matrix after checking dimensions, finiteness, Hermiticity and
    /// unit trace. Positivity is only probed by [`validate`](Self::validate)
    /// because it costs a factorisation.
    pub fn new(mat: CMatrix) -> Result<Self> {
        let dim = mat.dim();
        if !dim.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(dim));
        }
        if !mat.is_finite() {
            return Err(Error::NonFinite);
        }
        let herm = mat.hermiticity_defect();
        if herm > tol::HERMITICITY {
            return Err(Error::NotHermitian(herm));
        }
        let tr = mat.trace();
        let drift = ((tr.re - 1.0).powi(2) + tr.im.powi(2)).sqrt();
        if drift > tol::TRACE {
            return Err(Error::NotUnitTrace(drift));
        }
        Ok(DensityMatrix { num_qubits: dim.trailing_zeros() as usize, mat })
    }

    /// `|0…0⟩⟨0…0|` on `n` qubits.
    pub fn zero_state(num_qubits: usize) -> Self {
        Self::basis_state(num_qubits, 0)
    }

    /// `|x⟩⟨x|` on `n` qubits.
    pub fn basis_state(num_qubits: usize, x: u64) -> Self {
        let dim = 1usize << num_qubits;
        debug_assert!((x as usize) < dim);
        let mut mat = CMatrix::zeros(dim);
        mat.set(x as usize, x as usize, Complex64::new(1.0, 0.0));
        DensityMatrix { mat, num_qubits }
    }

    /// Pure state `|ψ⟩⟨ψ|` from amplitudes (must be normalised).
    pub fn from_amplitudes(amps: &[Complex64]) -> Result<Self> {
        let dim = amps.len();
        if !dim.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(dim));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if !norm.is_finite() {
            return Err(Error::NonFinite);
        }
        if (norm - 1.0).abs() > tol::TRACE {
            return Err(Error::NotUnitTrace((norm - 1.0).abs()));
        }
        let mat = CMatrix::from_fn(dim, |r, c| amps[r] * amps[c].conj());
        Ok(DensityMatrix { num_qubits: dim.trailing_zeros() as usize, mat })
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    #[inline]
    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        self.mat.get(r, c)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.mat.max_abs_diff(&other.mat)
    }

    /// Re-check the density-matrix invariants; with `check_positive` also
    /// probe positive semidefiniteness via pivoted Cholesky.
    pub fn validate(&self, check_positive: bool) -> Result<()> {
        if !self.mat.is_finite() {
            return Err(Error::NonFinite);
        }
        let herm = self.mat.hermiticity_defect();
        if herm > tol::HERMITICITY {
            return Err(Error::NotHermitian(herm));
        }
        let tr = self.mat.trace();
        let drift = ((tr.re - 1.0).powi(2) + tr.im.powi(2)).sqrt();
        if drift > tol::TRACE {
            return Err(Error::NotUnitTrace(drift));
        }
        if check_positive {
            let pc = self.mat.pivoted_cholesky(tol::PSD);
            if pc.min_residual_diag < -tol::PSD {
                return Err(Error::NotPositive(pc.min_residual_diag));
            }
        }
        Ok(())
    }

    /// `self ⊗ other` (self supplies the high-order qubits).
    pub fn tensor(&self, other: &Self) -> Self {
        DensityMatrix {
            mat: self.mat.kron(&other.mat),
            num_qubits: self.num_qubits + other.num_qubits,
        }
    }

    /// `U ρ U†` with `u` acting on `targets` (in the gate's qubit order).
    pub fn apply_unitary(&self, u: &Unitary, targets: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.apply_unitary_in_place(u, targets)?;
        Ok(out)
    }

    pub fn apply_unitary_in_place(&mut self, u: &Unitary, targets: &[usize]) -> Result<()> {
        if targets.len() != u.num_qubits() {
            return Err(Error::DimensionMismatch { expected: u.num_qubits(), got: targets.len() });
        }
        let tm = TargetMap::new(self.num_qubits, targets)?;
        self.mat.apply_left(u.matrix(), &tm);
        self.mat.apply_right_adjoint(u.matrix(), &tm);
        Ok(())
    }

    /// `Σ_r K_r ρ K_r†` with the channel acting on `targets`.
    pub fn apply_kraus(&self, ch: &KrausChannel, targets: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.apply_kraus_in_place(ch, targets)?;
        Ok(out)
    }

    pub fn apply_kraus_in_place(&mut self, ch: &KrausChannel, targets: &[usize]) -> Result<()> {
        if targets.len() != ch.num_qubits() {
            return Err(Error::DimensionMismatch { expected: ch.num_qubits(), got: targets.len() });
        }
        let tm = TargetMap::new(self.num_qubits, targets)?;
        if ch.ops().len() == 1 && ch.sparse_rows().is_none() {
            let op = &ch.ops()[0];
            self.mat.apply_left(op, &tm);
            self.mat.apply_right_adjoint(op, &tm);
            return Ok(());
        }
        let mut acc = CMatrix::zeros(self.dim());
        match ch.sparse_rows() {
            Some(all_rows) => {
                for rows in all_rows {
                    let mut term = self.mat.clone();
                    term.apply_left_sparse(rows, &tm);
                    term.apply_right_adjoint_sparse(rows, &tm);
                    acc.add_assign(&term);
                }
            }
            None => {
                for op in ch.ops() {
                    let mut term = self.mat.clone();
                    term.apply_left(op, &tm);
                    term.apply_right_adjoint(op, &tm);
                    acc.add_assign(&term);
                }
            }
        }
        self.mat = acc;
        Ok(())
    }

    /// Trace out every qubit not in `keep`; `keep` must be strictly
    /// increasing and non-empty. The kept qubits retain their relative order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let n = self.num_qubits;
        if keep.is_empty() || keep.len() > n {
            return Err(Error::DimensionMismatch { expected: n, got: keep.len() });
        }
        for w in keep.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::DuplicateTarget(w[1]));
            }
        }
        if let Some(&last) = keep.last() {
            if last >= n {
                return Err(Error::QubitOutOfRange { qubit: last, num_qubits: n });
            }
        }
        let k = keep.len();
        let t = n - k;
        // Scatter tables: kept bits → register positions, traced bits → the rest.
        let mut keep_offs = vec![0usize; 1 << k];
        for (r, off) in keep_offs.iter_mut().enumerate() {
            let mut o = 0usize;
            for (j, &q) in keep.iter().enumerate() {
                if (r >> (k - 1 - j)) & 1 == 1 {
                    o |= 1usize << (n - 1 - q);
                }
            }
            *off = o;
        }
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let mut tr_offs = vec![0usize; 1 << t];
        for (x, off) in tr_offs.iter_mut().enumerate() {
            let mut o = 0usize;
            for (j, &q) in traced.iter().enumerate() {
                if t > 0 && (x >> (t - 1 - j)) & 1 == 1 {
                    o |= 1usize << (n - 1 - q);
                }
            }
            *off = o;
        }
        let out_dim = 1usize << k;
        let mut out = CMatrix::zeros(out_dim);
        for r in 0..out_dim {
            for c in 0..out_dim {
                let mut acc = Complex64::new(0.0, 0.0);
                for &toff in &tr_offs {
                    acc += self.mat.get(keep_offs[r] + toff, keep_offs[c] + toff);
                }
                out.set(r, c, acc);
            }
        }
        Ok(DensityMatrix { mat: out, num_qubits: k })
    }

    /// Diagonal as a probability vector over computational-basis outcomes.
    /// Small negative dust is clamped to zero; genuine violations error.
    pub fn measurement_distribution(&self) -> Result<Vec<f64>> {
        let mut probs = Vec::with_capacity(self.dim());
        let mut total = 0.0f64;
        for i in 0..self.dim() {
            let p = self.mat.get(i, i).re;
            if !p.is_finite() || p < -tol::PSD || p > 1.0 + tol::PSD {
                return Err(Error::InvalidProbability(p));
            }
            let p = p.max(0.0);
            total += p;
            probs.push(p);
        }
        if (total - 1.0).abs() > tol::TRACE {
            return Err(Error::NotUnitTrace((total - 1.0).abs()));
        }
        Ok(probs)
    }

    /// Probability of reading `outcome` on `qubit`.
    pub fn outcome_probability(&self, qubit: usize, outcome: u8) -> Result<f64> {
        if qubit >= self.num_qubits {
            return Err(Error::QubitOutOfRange { qubit, num_qubits: self.num_qubits });
        }
        let bit = 1usize << (self.num_qubits - 1 - qubit);
        let want = if outcome == 0 { 0 } else { bit };
        let mut p = 0.0f64;
        for i in 0..self.dim() {
            if i & bit == want {
                p += self.mat.get(i, i).re;
            }
        }
        Ok(p.clamp(0.0, 1.0))
    }

    /// Project onto `qubit = outcome` and renormalise, returning the branch
    /// probability and the post-measurement state.
    pub fn project_onto(&self, qubit: usize, outcome: u8) -> Result<(f64, Self)> {
        let p = self.outcome_probability(qubit, outcome)?;
        if p <= 1e-300 {
            return Err(Error::ZeroProbabilityBranch);
        }
        let n = self.num_qubits;
        let bit = 1usize << (n - 1 - qubit);
        let want = if outcome == 0 { 0 } else { bit };
        let scale = Complex64::new(1.0 / p, 0.0);
        let mat = CMatrix::from_fn(self.dim(), |r, c| {
            if r & bit == want && c & bit == want {
                self.mat.get(r, c) * scale
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Ok((p, DensityMatrix { mat, num_qubits: n }))
    }

    /// Sample a projective measurement of `qubit`, collapsing the state.
    pub fn project_measure<R: Rng + ?Sized>(&self, qubit: usize, rng: &mut R) -> Result<(u8, Self)> {
        let p0 = self.outcome_probability(qubit, 0)?;
        let outcome = if rng.gen::<f64>() < p0 { 0u8 } else { 1u8 };
        let (_, state) = self.project_onto(qubit, outcome)?;
        Ok((outcome, state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qkernel::unitary::qft_sequence;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constructors_validate() {
        let mut bad_trace = CMatrix::identity(2);
        bad_trace.set(1, 1, c(0.5, 0.0));
        assert!(matches!(DensityMatrix::new(bad_trace), Err(Error::NotUnitTrace(_))));

        let mut non_herm = CMatrix::zeros(2);
        non_herm.set(0, 0, c(1.0, 0.0));
        non_herm.set(0, 1, c(0.1, 0.0));
        assert!(matches!(DensityMatrix::new(non_herm), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn tensor_and_partial_trace_roundtrip() {
        let h = Unitary::hadamard();
        let a = DensityMatrix::zero_state(1).apply_unitary(&h, &[0]).unwrap();
        let b = DensityMatrix::basis_state(2, 0b10);
        let ab = a.tensor(&b);
        assert_eq!(ab.num_qubits(), 3);
        let back_a = ab.partial_trace(&[0]).unwrap();
        let back_b = ab.partial_trace(&[1, 2]).unwrap();
        assert!(back_a.max_abs_diff(&a) < 1e-14);
        assert!(back_b.max_abs_diff(&b) < 1e-14);
    }

    #[test]
    fn bell_pair_reduces_to_maximally_mixed() {
        let bell = DensityMatrix::from_amplitudes(&[
            c(1.0 / 2.0f64.sqrt(), 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(1.0 / 2.0f64.sqrt(), 0.0),
        ])
        .unwrap();
        let red = bell.partial_trace(&[1]).unwrap();
        assert!((red.entry(0, 0).re - 0.5).abs() < 1e-15);
        assert!((red.entry(1, 1).re - 0.5).abs() < 1e-15);
        assert!(red.entry(0, 1).norm() < 1e-15);
    }

    #[test]
    fn unitary_preserves_validity() {
        let mut rho = DensityMatrix::zero_state(3);
        for q in 0..3 {
            rho = rho.apply_unitary(&Unitary::hadamard(), &[q]).unwrap();
        }
        rho = rho.apply_unitary(&Unitary::cnot(), &[0, 2]).unwrap();
        rho.validate(true).unwrap();
    }

    #[test]
    fn qft_circuit_matches_dense_matrix() {
        for n in 1..=5 {
            for inverse in [false, true] {
                // A product state with nontrivial phases to exercise all entries.
                let mut rho = DensityMatrix::zero_state(n);
                for q in 0..n {
                    rho = rho.apply_unitary(&Unitary::hadamard(), &[q]).unwrap();
                    rho = rho.apply_unitary(&Unitary::phase(0.37 + q as f64), &[q]).unwrap();
                }
                let dense = rho
                    .apply_unitary(
                        &Unitary::qft(n, inverse).unwrap(),
                        &(0..n).collect::<Vec<_>>(),
                    )
                    .unwrap();
                let mut circuit = rho.clone();
                for (gate, targets) in qft_sequence(n, inverse) {
                    circuit = circuit.apply_unitary(&gate, &targets).unwrap();
                }
                assert!(
                    circuit.max_abs_diff(&dense) < 1e-12,
                    "n={n} inverse={inverse}"
                );
            }
        }
    }

    #[test]
    fn qft_maps_phase_gradient_to_basis_state() {
        // Prepare the phase-gradient state QFT|5⟩, then apply the inverse.
        let n = 3;
        let d = 1usize << n;
        let amps: Vec<Complex64> = (0..d)
            .map(|k| {
                let angle = 2.0 * core::f64::consts::PI * (5 * k) as f64 / d as f64;
                Complex64::new(angle.cos(), angle.sin()) / (d as f64).sqrt()
            })
            .collect();
        let rho = DensityMatrix::from_amplitudes(&amps).unwrap();
        let out = rho.apply_unitary(&Unitary::qft(n, true).unwrap(), &[0, 1, 2]).unwrap();
        let probs = out.measurement_distribution().unwrap();
        assert!((probs[5] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projective_measurement_collapses() {
        let h = Unitary::hadamard();
        let plus = DensityMatrix::zero_state(1).apply_unitary(&h, &[0]).unwrap();
        assert!((plus.outcome_probability(0, 0).unwrap() - 0.5).abs() < 1e-15);
        let (p1, collapsed) = plus.project_onto(0, 1).unwrap();
        assert!((p1 - 0.5).abs() < 1e-15);
        assert!((collapsed.entry(1, 1).re - 1.0).abs() < 1e-14);

        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let (outcome, state) = plus.project_measure(0, &mut rng).unwrap();
        assert!((state.entry(outcome as usize, outcome as usize).re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_probability_branch_errors() {
        let zero = DensityMatrix::zero_state(1);
        assert!(matches!(zero.project_onto(0, 1), Err(Error::ZeroProbabilityBranch)));
    }

    #[test]
    fn kraus_unitary_matches_apply_unitary() {
        let rho = DensityMatrix::basis_state(2, 0b10)
            .apply_unitary(&Unitary::hadamard(), &[0])
            .unwrap();
        let via_unitary = rho.apply_unitary(&Unitary::cnot(), &[0, 1]).unwrap();
        let via_kraus = rho.apply_kraus(&KrausChannel::from_unitary(&Unitary::cnot()), &[0, 1]).unwrap();
        assert!(via_unitary.max_abs_diff(&via_kraus) < 1e-14);
    }

    #[test]
    fn measurement_distribution_checks_totals() {
        let rho = DensityMatrix::zero_state(2);
        let probs = rho.measurement_distribution().unwrap();
        assert_eq!(probs, vec![1.0, 0.0, 0.0, 0.0]);
    }
}

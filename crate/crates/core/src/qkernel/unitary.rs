//! Validated unitary gates.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::qkernel::matrix::CMatrix;
use crate::{tol, Error, Result};

// Supplies f64 math (sqrt, cos, ...) when no dependency pulls in std.
// Whenever std does enter the build graph (tests, std-enabled consumers),
// the inherent methods shadow these and the import goes unused.
#[allow(unused_imports)]
use num_traits::Float;

/// A gate on `num_qubits` qubits, checked unitary at construction.
#[derive(Clone, Debug)]
pub struct Unitary {
    mat: CMatrix,
    num_qubits: usize,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl Unitary {
    /// Wrap a matrix, verifying it is square over qubits, finite and unitary
    /// to within [`tol::UNITARITY`].
    pub fn new(mat: CMatrix) -> Result<Self> {
        let dim = mat.dim();
        if !dim.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(dim));
        }
        if !mat.is_finite() {
            return Err(Error::NonFinite);
        }
        let defect = mat.unitarity_defect();
        if defect > tol::UNITARITY {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Unitary { num_qubits: dim.trailing_zeros() as usize, mat })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn identity(num_qubits: usize) -> Self {
        Unitary { mat: CMatrix::identity(1 << num_qubits), num_qubits }
    }

    pub fn hadamard() -> Self {
        let s = 1.0f64 / 2.0f64.sqrt();
        let mat = CMatrix::from_rows(2, vec![c(s, 0.), c(s, 0.), c(s, 0.), c(-s, 0.)]).unwrap();
        Unitary { mat, num_qubits: 1 }
    }

    pub fn pauli_x() -> Self {
        let mat = CMatrix::from_rows(2, vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]).unwrap();
        Unitary { mat, num_qubits: 1 }
    }

    pub fn pauli_y() -> Self {
        let mat = CMatrix::from_rows(2, vec![c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]).unwrap();
        Unitary { mat, num_qubits: 1 }
    }

    pub fn pauli_z() -> Self {
        let mat = CMatrix::from_rows(2, vec![c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]).unwrap();
        Unitary { mat, num_qubits: 1 }
    }

    /// `diag(1, e^{iθ})`.
    pub fn phase(theta: f64) -> Self {
        let mut mat = CMatrix::zeros(2);
        mat.set(0, 0, c(1., 0.));
        mat.set(1, 1, c(theta.cos(), theta.sin()));
        Unitary { mat, num_qubits: 1 }
    }

    /// CNOT with the first target qubit as control, the second as target.
    pub fn cnot() -> Self {
        let mut mat = CMatrix::zeros(4);
        mat.set(0, 0, c(1., 0.));
        mat.set(1, 1, c(1., 0.));
        mat.set(2, 3, c(1., 0.));
        mat.set(3, 2, c(1., 0.));
        Unitary { mat, num_qubits: 2 }
    }

    /// `diag(1, 1, 1, e^{iθ})`; symmetric in its two qubits.
    pub fn controlled_phase(theta: f64) -> Self {
        let mut mat = CMatrix::identity(4);
        mat.set(3, 3, c(theta.cos(), theta.sin()));
        Unitary { mat, num_qubits: 2 }
    }

    /// Controlled-Z, i.e. `controlled_phase(π)` with exact entries.
    pub fn cz() -> Self {
        let mut mat = CMatrix::identity(4);
        mat.set(3, 3, c(-1., 0.));
        Unitary { mat, num_qubits: 2 }
    }

    /// Exchange the two target qubits.
    pub fn swap() -> Self {
        let mut mat = CMatrix::zeros(4);
        mat.set(0, 0, c(1., 0.));
        mat.set(1, 2, c(1., 0.));
        mat.set(2, 1, c(1., 0.));
        mat.set(3, 3, c(1., 0.));
        Unitary { mat, num_qubits: 2 }
    }

    /// Quantum Fourier transform on `n` qubits:
    /// `F[j,k] = ω^{jk} / √d` with `ω = e^{2πi/d}`, `d = 2^n`
    /// (conjugated when `inverse` is set). Qubit 0 is the most significant
    /// bit of both input and output indices.
    pub fn qft(n: usize, inverse: bool) -> Result<Self> {
        if n == 0 || n > 16 {
            return Err(Error::InvalidConfig(alloc::format!(
                "QFT size {n} outside supported range 1..=16"
            )));
        }
        let d = 1usize << n;
        let norm = 1.0 / (d as f64).sqrt();
        let sign = if inverse { -1.0 } else { 1.0 };
        let mat = CMatrix::from_fn(d, |j, k| {
            // Reduce the exponent exactly before touching floating point.
            let e = (j as u64 * k as u64) % d as u64;
            let angle = sign * 2.0 * PI * (e as f64) / (d as f64);
            c(norm * angle.cos(), norm * angle.sin())
        });
        Unitary::new(mat)
    }
}

/// The QFT as a gate sequence: `(gate, targets)` pairs to apply in order.
///
/// Hadamards interleaved with controlled phases, then a qubit-order reversal;
/// equals [`Unitary::qft`] exactly (up to roundoff), which the kernel tests
/// assert. Engines prefer this form because applying an n-qubit dense matrix
/// costs d³ while the circuit costs O(n²) two-qubit gates.
pub fn qft_sequence(n: usize, inverse: bool) -> Vec<(Unitary, Vec<usize>)> {
    let mut seq: Vec<(Unitary, Vec<usize>)> = Vec::new();
    for q in 0..n {
        seq.push((Unitary::hadamard(), vec![q]));
        for ctl in q + 1..n {
            let theta = 2.0 * PI / (1u64 << (ctl - q + 1)) as f64;
            seq.push((Unitary::controlled_phase(theta), vec![ctl, q]));
        }
    }
    for q in 0..n / 2 {
        seq.push((Unitary::swap(), vec![q, n - 1 - q]));
    }
    if inverse {
        seq.reverse();
        for (gate, _) in seq.iter_mut() {
            *gate = Unitary { mat: gate.mat.adjoint(), num_qubits: gate.num_qubits };
        }
    }
    seq
}

//! Kraus-operator channels.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::qkernel::matrix::CMatrix;
use crate::qkernel::unitary::Unitary;
use crate::{tol, Error, Result};

/// A completely positive trace-preserving map given by operators `K_r` with
/// `Σ K_r† K_r = I`, verified at construction.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    ops: Vec<CMatrix>,
    // Nonzero entries per op, `rows[a] = [(b, K[a,b]), …]`, kept when the ops
    // are sparse enough that fiber application should skip zeros.
    sparse: Option<Vec<Vec<Vec<(usize, Complex64)>>>>,
    num_qubits: usize,
}

impl KrausChannel {
    pub fn new(ops: Vec<CMatrix>) -> Result<Self> {
        let dim = match ops.first() {
            Some(op) => op.dim(),
            None => return Err(Error::DimensionMismatch { expected: 1, got: 0 }),
        };
        if !dim.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(dim));
        }
        for op in &ops {
            if op.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: op.dim() });
            }
            if !op.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        let defect = completeness_defect(&ops);
        if defect > tol::COMPLETENESS {
            return Err(Error::NotCompletelyPositive(defect));
        }
        let total: usize = ops.len() * dim * dim;
        let nnz: usize = ops
            .iter()
            .map(|op| op.data().iter().filter(|v| **v != Complex64::new(0.0, 0.0)).count())
            .sum();
        let sparse = (nnz * 4 <= total).then(|| {
            ops.iter()
                .map(|op| {
                    (0..dim)
                        .map(|a| {
                            (0..dim)
                                .filter_map(|b| {
                                    let v = op.get(a, b);
                                    (v != Complex64::new(0.0, 0.0)).then_some((b, v))
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        });
        Ok(KrausChannel { num_qubits: dim.trailing_zeros() as usize, ops, sparse })
    }

    pub fn from_unitary(u: &Unitary) -> Self {
        // A single unitary op always satisfies completeness exactly.
        KrausChannel {
            num_qubits: u.num_qubits(),
            ops: alloc::vec![u.matrix().clone()],
            sparse: None,
        }
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub(crate) fn sparse_rows(&self) -> Option<&[Vec<Vec<(usize, Complex64)>>]> {
        self.sparse.as_deref()
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// `max |Σ K†K - I|` over entries.
    pub fn completeness_defect(&self) -> f64 {
        completeness_defect(&self.ops)
    }
}

fn completeness_defect(ops: &[CMatrix]) -> f64 {
    let dim = ops[0].dim();
    let mut sum = CMatrix::zeros(dim);
    for op in ops {
        sum.add_assign(&op.adjoint().mul(op));
    }
    sum.max_abs_diff(&CMatrix::identity(dim))
}

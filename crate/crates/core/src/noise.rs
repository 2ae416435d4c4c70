//! Single-qubit link noise applied to entanglement resources.
//!
//! Both models damp the off-diagonal (coherence) part of a qubit by `1 - p`
//! per application; depolarising noise additionally mixes the populations
//! toward I/2. `p` is the channel parameter, not the Pauli-event probability:
//! a dephasing link applies Z with probability `p/2`, a depolarising link
//! applies each of X, Y, Z with probability `p/4`.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::qkernel::{DensityMatrix, KrausChannel, Unitary};
use crate::{Error, Result};

// Supplies f64 math (sqrt, cos, ...) when no dependency pulls in std.
// Whenever std does enter the build graph (tests, std-enabled consumers),
// the inherent methods shadow these and the import goes unused.
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum NoiseKind {
    Dephasing,
    Depolarising,
}

/// A noise kind plus strength, applied independently to every qubit of an
/// entanglement resource when it is generated.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseModel {
    kind: NoiseKind,
    p: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        Ok(NoiseModel { kind, p })
    }

    /// The noiseless model (`p = 0`; the kind is then irrelevant).
    pub fn none() -> Self {
        NoiseModel { kind: NoiseKind::Dephasing, p: 0.0 }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_noiseless(&self) -> bool {
        self.p == 0.0
    }

    /// Factor by which one application multiplies a qubit's off-diagonal
    /// terms: `1 - p` for both kinds.
    pub fn coherence_factor(&self) -> f64 {
        1.0 - self.p
    }

    /// The single-qubit channel.
    pub fn channel(&self) -> KrausChannel {
        let ops = self
            .pauli_branches()
            .into_iter()
            .map(|(w, u)| u.matrix().scale(num_complex::Complex64::new(w.sqrt(), 0.0)))
            .collect();
        // Branch weights sum to 1 by construction, so this cannot fail.
        KrausChannel::new(ops).expect("pauli mixture is trace preserving")
    }

    /// The channel as a Pauli mixture: `(probability, unitary)` branches.
    /// Averaging the branches reproduces [`channel`](Self::channel) exactly,
    /// which is what makes trajectory sampling unbiased.
    pub fn pauli_branches(&self) -> Vec<(f64, Unitary)> {
        match self.kind {
            NoiseKind::Dephasing => vec![
                (1.0 - self.p / 2.0, Unitary::identity(1)),
                (self.p / 2.0, Unitary::pauli_z()),
            ],
            NoiseKind::Depolarising => vec![
                (1.0 - 3.0 * self.p / 4.0, Unitary::identity(1)),
                (self.p / 4.0, Unitary::pauli_x()),
                (self.p / 4.0, Unitary::pauli_y()),
                (self.p / 4.0, Unitary::pauli_z()),
            ],
        }
    }
}

/// `(1 - p/2) ρ + (p/2) ZρZ`: multiplies coherences by `1 - p`.
pub fn dephasing_channel(p: f64) -> Result<KrausChannel> {
    Ok(NoiseModel::new(NoiseKind::Dephasing, p)?.channel())
}

/// `(1 - p) ρ + p I/2`, in Kraus form
/// `{√(1-3p/4) I, √(p/4) X, √(p/4) Y, √(p/4) Z}`.
pub fn depolarising_channel(p: f64) -> Result<KrausChannel> {
    Ok(NoiseModel::new(NoiseKind::Depolarising, p)?.channel())
}

/// Apply the model's channel independently to each listed qubit.
pub fn apply_link_noise(
    rho: &DensityMatrix,
    noise: &NoiseModel,
    qubits: &[usize],
) -> Result<DensityMatrix> {
    if noise.is_noiseless() {
        return Ok(rho.clone());
    }
    let ch = noise.channel();
    let mut out = rho.clone();
    for &q in qubits {
        out.apply_kraus_in_place(&ch, &[q])?;
    }
    Ok(out)
}

/// Trajectory form of [`apply_link_noise`]: sample one Pauli branch per qubit
/// and apply it as a unitary. Returns the chosen branch index per qubit;
/// averaging over branches with their probabilities reproduces the channel.
pub fn apply_link_noise_sampled<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    noise: &NoiseModel,
    qubits: &[usize],
    rng: &mut R,
) -> Result<(DensityMatrix, Vec<usize>)> {
    let branches = noise.pauli_branches();
    let mut out = rho.clone();
    let mut picks = Vec::with_capacity(qubits.len());
    for &q in qubits {
        let mut u: f64 = rng.gen();
        let mut chosen = branches.len() - 1;
        for (i, (w, _)) in branches.iter().enumerate() {
            if u < *w {
                chosen = i;
                break;
            }
            u -= w;
        }
        out.apply_unitary_in_place(&branches[chosen].1, &[q])?;
        picks.push(chosen);
    }
    Ok((out, picks))
}

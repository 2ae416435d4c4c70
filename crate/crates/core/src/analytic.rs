//! Closed-form model of the adder's output distribution.
//!
//! With per-column coherence parameter `a`, the probability of reading `x`
//! from an n-bit accumulator holding the true sum `T` is
//!
//! ```text
//! P(x) = 2^-n · Π_{s=0}^{n-1} [1 + a·cos(2π (T - x mod 2^{n-s}) / 2^{n-s})]
//! ```
//!
//! i.e. each column contributes an interference fringe at its own digit
//! weight. The module also provides the input-independent additive-error
//! form, the predicted `a` for GHZ-mediated links, and checks for the
//! structural identities the distribution must satisfy (reflection symmetry
//! around the true sum, dominance of power-of-two offsets, and closer
//! outcomes beating their reflections).

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::dqa::{correct_sum, OutcomeDistribution};
use crate::noise::NoiseModel;
use crate::{Error, Result};

// Supplies f64 math (sqrt, cos, ...) when no dependency pulls in std.
// Whenever std does enter the build graph (tests, std-enabled consumers),
// the inherent methods shadow these and the import goes unused.
#[allow(unused_imports)]
use num_traits::Float;

fn validate_a(a: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidConfig(alloc::format!(
            "coherence parameter a={a} outside [0, 1]"
        )));
    }
    Ok(())
}

/// One column's fringe factor `cos(2π·w/d)` with `w = (T - x) mod d`,
/// `d = 2^{n-s}`. The offset is reduced and folded onto `[0, d/2]` in exact
/// integer arithmetic first, so outcomes at mirrored offsets get bit-identical
/// cosines and the symmetry identities hold exactly in floating point.
fn column_cos(total: u64, x: u64, s: usize, n: usize) -> f64 {
    let d = 1u64 << (n - s);
    let w = (total as i128 - x as i128).rem_euclid(d as i128) as u64;
    let folded = w.min(d - w);
    (2.0 * PI * folded as f64 / d as f64).cos()
}

/// The closed-form output distribution for the given party inputs.
pub fn analytic_distribution(inputs: &[u64], n: usize, a: f64) -> Result<OutcomeDistribution> {
    if inputs.is_empty() {
        return Err(Error::InvalidConfig("at least one party input is required".into()));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("accumulator needs at least one bit".into()));
    }
    validate_a(a)?;
    let total = correct_sum(inputs, n);
    let dim = 1usize << n;
    let norm = 1.0 / dim as f64;
    let probs: Vec<f64> = (0..dim as u64)
        .map(|x| {
            let mut p = norm;
            for s in 0..n {
                p *= 1.0 + a * column_cos(total, x, s, n);
            }
            p.max(0.0)
        })
        .collect();
    OutcomeDistribution::new(n, probs)
}

/// Distribution of the additive error `y = x - T mod 2^n`; independent of the
/// inputs, and bit-identical to `analytic_distribution(..).shifted_by(T)`.
pub fn error_distribution(n: usize, a: f64) -> Result<OutcomeDistribution> {
    analytic_distribution(&[0], n, a)
}

/// Probability of reading the correct sum: `((1+a)/2)^n`.
pub fn peak_probability(n: usize, a: f64) -> f64 {
    ((1.0 + a) / 2.0).powi(n as i32)
}

/// Coherence parameter for a protocol that consumes `rounds` GHZ resources of
/// `ghz_size` qubits per column: each noisy qubit-use multiplies the column
/// coherence by `1 - p`, so `a = (1-p)^(rounds·ghz_size)`.
pub fn predicted_a(noise: &NoiseModel, ghz_size: usize, rounds: usize) -> f64 {
    noise.coherence_factor().powi((rounds * ghz_size) as i32)
}

/// `(angle, radius)` pairs mapping outcome `x` to angle `2πx/2^n` with radius
/// `P(x)` — the layout used to plot the fringes radially.
pub fn polar_coordinates(dist: &OutcomeDistribution) -> Vec<(f64, f64)> {
    let d = dist.probs().len();
    dist.probs()
        .iter()
        .enumerate()
        .map(|(x, &p)| (2.0 * PI * x as f64 / d as f64, p))
        .collect()
}

/// Outcome of one structural check over a distribution.
#[derive(Clone, Copy, Debug)]
pub struct CheckReport {
    /// Number of outcome pairs compared.
    pub comparisons: usize,
    /// Worst violation found (0 when every comparison held exactly).
    pub max_violation: f64,
    /// Budget the violations were checked against.
    pub tol: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_violation <= self.tol
    }
}

fn bits_of(probs: &[f64]) -> Result<usize> {
    let d = probs.len();
    if d < 2 || !d.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(d));
    }
    Ok(d.trailing_zeros() as usize)
}

/// Offsets `+z` and `-z` from the correct sum are equally likely:
/// `P(T+z) = P(T+2^n-z)` for `z ≤ 2^{n-1}`.
pub fn check_reflection_symmetry(probs: &[f64], correct: u64, tol: f64) -> Result<CheckReport> {
    bits_of(probs)?;
    let d = probs.len();
    let at = |z: usize| probs[(correct as usize + z) & (d - 1)];
    let mut worst = 0.0f64;
    let mut comparisons = 0;
    for z in 1..=(d / 2) {
        worst = worst.max((at(z) - at(d - z)).abs());
        comparisons += 1;
    }
    Ok(CheckReport { comparisons, max_violation: worst, tol })
}

/// A power-of-two offset dominates everything at most that far out:
/// `P(T+2^k) ≥ P(T+z)` for `k < n`, `1 ≤ z ≤ 2^k`.
pub fn check_power_of_two_dominance(probs: &[f64], correct: u64, tol: f64) -> Result<CheckReport> {
    let n = bits_of(probs)?;
    let d = probs.len();
    let at = |z: usize| probs[(correct as usize + z) & (d - 1)];
    let mut worst = 0.0f64;
    let mut comparisons = 0;
    for k in 1..n {
        let pk = at(1 << k);
        for z in 1..=(1 << k) {
            worst = worst.max(at(z) - pk);
            comparisons += 1;
        }
    }
    Ok(CheckReport { comparisons, max_violation: worst.max(0.0), tol })
}

/// Within one power-of-two shell, the offset closer to the true sum beats its
/// reflection: `P(T+z) ≥ P(T+2^{k+1}-z)` for `k < n`, `1 ≤ z ≤ 2^k`.
pub fn check_proximity_ordering(probs: &[f64], correct: u64, tol: f64) -> Result<CheckReport> {
    let n = bits_of(probs)?;
    let d = probs.len();
    let at = |z: usize| probs[(correct as usize + z) & (d - 1)];
    let mut worst = 0.0f64;
    let mut comparisons = 0;
    for k in 1..n {
        for z in 1..=(1 << k) {
            let near = at(z);
            let far = at(((1 << (k + 1)) - z) & (d - 1));
            worst = worst.max(far - near);
            comparisons += 1;
        }
    }
    Ok(CheckReport { comparisons, max_violation: worst.max(0.0), tol })
}

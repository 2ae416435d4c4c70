//! The distributed adder: m parties add their private integers into an
//! n-qubit accumulator on a server they share no quantum channel with beyond
//! noisy GHZ links.
//!
//! One run, column by column (column `s` is the accumulator digit of weight
//! `2^s`, held by register qubit `n-1-s`):
//!
//! 1. the server puts the column qubit into |+⟩ (the QFT of |0⟩);
//! 2. an entangle fan-out session copies it to one qubit per party;
//! 3. party `i` applies the diagonal phase `2π(t_i mod 2^{n-s})/2^{n-s}`;
//! 4. a disentangle fan-out session folds the copies back;
//! 5. after all columns, the server applies the inverse QFT and measures,
//!    reading the sum mod 2^n.
//!
//! Two exact engines compute the output distribution: a factorized one that
//! exploits that columns never interact (simulate each column with its GHZ
//! resource, tensor the reduced server qubits), and a full-register one that
//! holds all n(m+1) data qubits at once and applies the fan-out as an
//! extracted Kraus channel. Sampling wrappers draw shot histograms either
//! from an exact distribution or by Monte-Carlo trajectories with sampled
//! Pauli noise and measurement outcomes.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::ghzlink::{
    disentangle_fanout, entangle_fanout, fanout_deferred, generate_noisy_ghz,
    generate_noisy_ghz_sampled, SessionTranscript,
};
use crate::noise::NoiseModel;
use crate::qkernel::{qft_sequence, CMatrix, DensityMatrix, KrausChannel, Unitary};
use crate::{tol, Error, Result, DEFAULT_MAX_QUBITS};

// Supplies f64 math (sqrt, cos, ...) when no dependency pulls in std.
// Whenever std does enter the build graph (tests, std-enabled consumers),
// the inherent methods shadow these and the import goes unused.
#[allow(unused_imports)]
use num_traits::Float;

/// Which exact engine evaluates the output distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Engine {
    /// Per-column simulation, reduced server qubits tensored at the end.
    Factorized,
    /// Monolithic n(m+1)-qubit register, fan-outs applied as Kraus channels.
    Full,
}

/// Whether link noise acts on both GHZ resources of a column or only on the
/// entangle-round resource (useful for isolating per-round damping).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseRounds {
    Both,
    EntangleOnly,
}

/// Full description of one adder experiment.
#[derive(Clone, Debug)]
pub struct DqaConfig {
    /// Party inputs `t_i`; the sum is accumulated mod `2^n`.
    pub inputs: Vec<u64>,
    /// Accumulator width in bits.
    pub n: usize,
    pub noise: NoiseModel,
    pub engine: Engine,
    /// Shots for the sampling entry points.
    pub shots: u64,
    pub seed: u64,
    pub noise_rounds: NoiseRounds,
    /// Ceiling on simultaneously simulated qubits.
    pub max_qubits: usize,
}

impl DqaConfig {
    pub fn new(inputs: Vec<u64>, n: usize) -> Self {
        DqaConfig {
            inputs,
            n,
            noise: NoiseModel::none(),
            engine: Engine::Factorized,
            shots: 9000,
            seed: 0,
            noise_rounds: NoiseRounds::Both,
            max_qubits: DEFAULT_MAX_QUBITS,
        }
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn with_shots(mut self, shots: u64) -> Self {
        self.shots = shots;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise_rounds(mut self, rounds: NoiseRounds) -> Self {
        self.noise_rounds = rounds;
        self
    }

    pub fn with_max_qubits(mut self, max_qubits: usize) -> Self {
        self.max_qubits = max_qubits;
        self
    }

    /// Number of parties.
    pub fn m(&self) -> usize {
        self.inputs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::InvalidConfig("at least one party input is required".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("accumulator needs at least one bit".into()));
        }
        if self.max_qubits == 0 {
            return Err(Error::InvalidConfig("max_qubits must be positive".into()));
        }
        Ok(())
    }

    fn second_round_noise(&self) -> NoiseModel {
        match self.noise_rounds {
            NoiseRounds::Both => self.noise,
            NoiseRounds::EntangleOnly => NoiseModel::none(),
        }
    }
}

/// `Σ inputs mod 2^n`, exact for any number of u64 summands.
pub fn correct_sum(inputs: &[u64], n: usize) -> u64 {
    let modulus = 1u128 << n;
    let total = inputs.iter().fold(0u128, |acc, &t| (acc + t as u128) % modulus);
    total as u64
}

/// The diagonal phase party `i` applies on column `s`:
/// `2π (t mod 2^{n-s}) / 2^{n-s}`.
pub fn party_phase_angle(t: u64, s: usize, n: usize) -> f64 {
    debug_assert!(s < n);
    let denom = 1u64 << (n - s);
    let reduced = t % denom;
    2.0 * PI * reduced as f64 / denom as f64
}

fn check_capacity(needed: usize, limit: usize, what: &'static str) -> Result<()> {
    if needed > limit {
        return Err(Error::Capacity { needed, limit, what });
    }
    Ok(())
}

/// A probability distribution over `2^n` measurement outcomes.
#[derive(Clone, Debug)]
pub struct OutcomeDistribution {
    n: usize,
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1 << n {
            return Err(Error::DimensionMismatch { expected: 1 << n, got: probs.len() });
        }
        let mut total = 0.0f64;
        for &p in &probs {
            if !p.is_finite() || p < -tol::PSD || p > 1.0 + tol::PSD {
                return Err(Error::InvalidProbability(p));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::NotUnitTrace((total - 1.0).abs()));
        }
        Ok(OutcomeDistribution { n, probs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: u64) -> f64 {
        self.probs[x as usize & ((1 << self.n) - 1)]
    }

    pub fn most_likely(&self) -> u64 {
        let mut best = 0usize;
        for i in 1..self.probs.len() {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        best as u64
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.n, other.n);
        self.probs
            .iter()
            .zip(other.probs.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `½ Σ |p - q|`.
    pub fn total_variation(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.n, other.n);
        0.5 * self
            .probs
            .iter()
            .zip(other.probs.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// Reindex outcomes relative to `x0`: entry `z` of the result is the
    /// probability of outcome `x0 + z mod 2^n`. With `x0` the correct sum
    /// this is the additive-error distribution.
    pub fn shifted_by(&self, x0: u64) -> Self {
        let d = self.probs.len();
        let probs = (0..d).map(|z| self.probs[(x0 as usize + z) & (d - 1)]).collect();
        OutcomeDistribution { n: self.n, probs }
    }
}

/// Shot counts over `2^n` outcomes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    n: usize,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn new(n: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != 1 << n {
            return Err(Error::DimensionMismatch { expected: 1 << n, got: counts.len() });
        }
        Ok(Histogram { n, counts })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn shots(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.shots().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    pub fn most_frequent(&self) -> u64 {
        let mut best = 0usize;
        for i in 1..self.counts.len() {
            if self.counts[i] > self.counts[best] {
                best = i;
            }
        }
        best as u64
    }

    /// Total variation between the empirical frequencies and `dist`.
    pub fn total_variation_vs(&self, dist: &OutcomeDistribution) -> f64 {
        debug_assert_eq!(self.n, dist.n);
        let freqs = self.frequencies();
        0.5 * freqs
            .iter()
            .zip(dist.probs.iter())
            .map(|(f, p)| (f - p).abs())
            .sum::<f64>()
    }
}

// ---------------------------------------------------------------------------
// Exact engines
// ---------------------------------------------------------------------------

/// Exact output distribution with the engine chosen in `cfg`.
pub fn run_exact(cfg: &DqaConfig) -> Result<OutcomeDistribution> {
    match cfg.engine {
        Engine::Factorized => run_exact_factorized(cfg),
        Engine::Full => run_exact_full(cfg),
    }
}

/// The state of one column after entangle fan-out, phases and disentangle
/// fan-out, on its private (m+1)-qubit register (server qubit 0).
fn evolve_column(cfg: &DqaConfig, entangled: &DensityMatrix, s: usize) -> Result<DensityMatrix> {
    let m = cfg.m();
    let receivers: Vec<usize> = (1..=m).collect();
    let mut col = entangled.clone();
    for (i, &t) in cfg.inputs.iter().enumerate() {
        let theta = party_phase_angle(t, s, cfg.n);
        col.apply_unitary_in_place(&Unitary::phase(theta), &[1 + i])?;
    }
    let ghz2 = generate_noisy_ghz(m + 1, &cfg.second_round_noise())?;
    fanout_deferred(&col, 0, &receivers, &ghz2)
}

/// Column register right after the entangle fan-out; identical for every
/// column, so engines compute it once per run.
fn entangled_column(cfg: &DqaConfig) -> Result<DensityMatrix> {
    let m = cfg.m();
    check_capacity(2 * (m + 1), cfg.max_qubits, "column fan-out")?;
    let receivers: Vec<usize> = (1..=m).collect();
    let mut reg = DensityMatrix::zero_state(m + 1);
    reg.apply_unitary_in_place(&Unitary::hadamard(), &[0])?;
    let ghz = generate_noisy_ghz(m + 1, &cfg.noise)?;
    fanout_deferred(&reg, 0, &receivers, &ghz)
}

/// Reduced state of the server qubit for column `s` after the full column
/// pipeline — the per-column object the closed-form model describes.
pub fn server_column_state(cfg: &DqaConfig, s: usize) -> Result<DensityMatrix> {
    cfg.validate()?;
    if s >= cfg.n {
        return Err(Error::InvalidConfig(alloc::format!(
            "column index {s} out of range for n={}",
            cfg.n
        )));
    }
    let entangled = entangled_column(cfg)?;
    let col = evolve_column(cfg, &entangled, s)?;
    col.partial_trace(&[0])
}

fn apply_inverse_qft(rho: &mut DensityMatrix, n: usize) -> Result<()> {
    for (gate, targets) in qft_sequence(n, true) {
        rho.apply_unitary_in_place(&gate, &targets)?;
    }
    Ok(())
}

/// Column-wise engine: columns never interact, so each is simulated on its
/// own (m+1)-qubit register and only the reduced server qubits are tensored
/// for the final inverse QFT.
pub fn run_exact_factorized(cfg: &DqaConfig) -> Result<OutcomeDistribution> {
    cfg.validate()?;
    check_capacity(cfg.n, cfg.max_qubits, "server register")?;
    let entangled = entangled_column(cfg)?;
    let mut cols: Vec<DensityMatrix> = Vec::with_capacity(cfg.n);
    for s in 0..cfg.n {
        let col = evolve_column(cfg, &entangled, s)?;
        cols.push(col.partial_trace(&[0])?);
    }
    // Register qubit r holds column s = n-1-r (most significant digit last).
    let mut server = cols[cfg.n - 1].clone();
    for r in 1..cfg.n {
        server = server.tensor(&cols[cfg.n - 1 - r]);
    }
    apply_inverse_qft(&mut server, cfg.n)?;
    OutcomeDistribution::new(cfg.n, server.measurement_distribution()?)
}

/// Extract the fan-out session (server + m receivers, one noisy GHZ) as a
/// Kraus channel on m+1 qubits by running the deferred-measurement protocol
/// on half of a maximally entangled register and factoring the resulting
/// process matrix with pivoted Cholesky.
pub fn fanout_channel(m: usize, noise: &NoiseModel, max_qubits: usize) -> Result<KrausChannel> {
    if m == 0 {
        return Err(Error::InvalidConfig("fan-out needs at least one receiver".into()));
    }
    let k = m + 1;
    // 2k data qubits plus the transient GHZ qubit peak inside the session.
    check_capacity(3 * k, max_qubits, "channel extraction")?;
    let d = 1usize << k;
    let mut amps = vec![Complex64::new(0.0, 0.0); d * d];
    let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    for i in 0..d {
        amps[(i << k) | i] = amp;
    }
    let omega = DensityMatrix::from_amplitudes(&amps)?;
    let ghz = generate_noisy_ghz(k, noise)?;
    let receivers: Vec<usize> = (k + 1..2 * k).collect();
    let out = fanout_deferred(&omega, k, &receivers, &ghz)?;

    // out = (I ⊗ ε)(|Ω⟩⟨Ω|); d·out[(i,a),(i',a')] = Σ_r K_r[a,i] conj(K_r[a',i']).
    let process = out.matrix().scale(Complex64::new(d as f64, 0.0));
    let mut floor = d as f64 * 1e-13;
    loop {
        let pc = process.pivoted_cholesky(floor);
        if pc.min_residual_diag < -tol::PSD * d as f64 {
            return Err(Error::NotPositive(pc.min_residual_diag));
        }
        let ops: Vec<CMatrix> = pc
            .cols
            .iter()
            .map(|w| CMatrix::from_fn(d, |a, i| w[(i << k) | a]))
            .collect();
        match KrausChannel::new(ops) {
            Ok(ch) => return Ok(ch),
            // Too much mass left under the pivot floor; dig deeper.
            Err(Error::NotCompletelyPositive(_)) if floor > d as f64 * 1e-16 => {
                floor /= 10.0;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Monolithic engine: all n(m+1) data qubits in one register, each column's
/// fan-outs applied as the extracted channel.
pub fn run_exact_full(cfg: &DqaConfig) -> Result<OutcomeDistribution> {
    cfg.validate()?;
    let m = cfg.m();
    let n = cfg.n;
    let total = n * (m + 1);
    check_capacity(total, cfg.max_qubits, "full register")?;
    let ch1 = fanout_channel(m, &cfg.noise, cfg.max_qubits)?;
    let ch2 = match cfg.noise_rounds {
        NoiseRounds::Both => ch1.clone(),
        NoiseRounds::EntangleOnly => fanout_channel(m, &NoiseModel::none(), cfg.max_qubits)?,
    };

    // Layout: server qubits 0..n; copies for register qubit r at
    // n + r·m .. n + (r+1)·m, one per party.
    let column_targets = |r: usize| -> Vec<usize> {
        let mut t = Vec::with_capacity(m + 1);
        t.push(r);
        t.extend(n + r * m..n + (r + 1) * m);
        t
    };

    let mut rho = DensityMatrix::zero_state(total);
    for r in 0..n {
        rho.apply_unitary_in_place(&Unitary::hadamard(), &[r])?;
    }
    for r in 0..n {
        rho.apply_kraus_in_place(&ch1, &column_targets(r))?;
    }
    for r in 0..n {
        let s = n - 1 - r;
        for (i, &t) in cfg.inputs.iter().enumerate() {
            let theta = party_phase_angle(t, s, n);
            rho.apply_unitary_in_place(&Unitary::phase(theta), &[n + r * m + i])?;
        }
    }
    for r in 0..n {
        rho.apply_kraus_in_place(&ch2, &column_targets(r))?;
    }
    let keep: Vec<usize> = (0..n).collect();
    let mut server = rho.partial_trace(&keep)?;
    apply_inverse_qft(&mut server, n)?;
    OutcomeDistribution::new(n, server.measurement_distribution()?)
}

/// Mean single-qubit coherence parameter across columns, with the guarantee
/// that the columns agree: `a_s = 2|⟨0|ρ_s|1⟩|` must be uniform in `s` up to
/// [`tol::ENGINE_MATCH`], else [`Error::FidelityNotUniform`].
pub fn fit_fidelity_param(cfg: &DqaConfig) -> Result<f64> {
    cfg.validate()?;
    let entangled = entangled_column(cfg)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sum = 0.0f64;
    for s in 0..cfg.n {
        let col = evolve_column(cfg, &entangled, s)?;
        let reduced = col.partial_trace(&[0])?;
        let a = 2.0 * reduced.entry(0, 1).norm();
        lo = lo.min(a);
        hi = hi.max(a);
        sum += a;
    }
    if hi - lo > tol::ENGINE_MATCH {
        return Err(Error::FidelityNotUniform(hi - lo));
    }
    Ok(sum / cfg.n as f64)
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

fn shot_rng(seed: u64, shot: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(shot);
    rng
}

fn draw_outcome<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Draw `shots` outcomes from an already-computed distribution, one
/// independent RNG stream per shot (reproducible and order-independent).
pub fn sample_from(dist: &OutcomeDistribution, shots: u64, seed: u64) -> Result<Histogram> {
    if shots == 0 {
        return Err(Error::InvalidConfig("shots must be positive".into()));
    }
    let mut cdf = Vec::with_capacity(dist.probs().len());
    let mut acc = 0.0f64;
    for &p in dist.probs() {
        acc += p;
        cdf.push(acc);
    }
    let mut counts = vec![0u64; dist.probs().len()];
    for shot in 0..shots {
        let mut rng = shot_rng(seed, shot);
        counts[draw_outcome(&cdf, &mut rng)] += 1;
    }
    Histogram::new(dist.n(), counts)
}

/// Draw `cfg.shots` outcomes from the exact distribution.
pub fn sample(cfg: &DqaConfig) -> Result<Histogram> {
    sample_from(&run_exact(cfg)?, cfg.shots, cfg.seed)
}

fn trajectory_run<R: Rng + ?Sized>(
    cfg: &DqaConfig,
    rng: &mut R,
) -> Result<(u64, Vec<SessionTranscript>)> {
    let m = cfg.m();
    let receivers: Vec<usize> = (1..=m).collect();
    let mut transcripts = Vec::with_capacity(2 * cfg.n);
    let mut cols: Vec<DensityMatrix> = Vec::with_capacity(cfg.n);
    for s in 0..cfg.n {
        let mut col = DensityMatrix::zero_state(m + 1);
        col.apply_unitary_in_place(&Unitary::hadamard(), &[0])?;
        let (ghz1, _) = generate_noisy_ghz_sampled(m + 1, &cfg.noise, rng)?;
        let (mut col, tr1) = entangle_fanout(&col, 0, &receivers, &ghz1, rng)?;
        transcripts.push(tr1);
        for (i, &t) in cfg.inputs.iter().enumerate() {
            let theta = party_phase_angle(t, s, cfg.n);
            col.apply_unitary_in_place(&Unitary::phase(theta), &[1 + i])?;
        }
        let (ghz2, _) = generate_noisy_ghz_sampled(m + 1, &cfg.second_round_noise(), rng)?;
        let (col, tr2) = disentangle_fanout(&col, 0, &receivers, &ghz2, rng)?;
        transcripts.push(tr2);
        cols.push(col.partial_trace(&[0])?);
    }
    let mut server = cols[cfg.n - 1].clone();
    for r in 1..cfg.n {
        server = server.tensor(&cols[cfg.n - 1 - r]);
    }
    apply_inverse_qft(&mut server, cfg.n)?;
    let probs = server.measurement_distribution()?;
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0f64;
    for &p in &probs {
        acc += p;
        cdf.push(acc);
    }
    Ok((draw_outcome(&cdf, rng) as u64, transcripts))
}

/// One Monte-Carlo trajectory (sampled GHZ Pauli noise, sampled session
/// measurements, one readout), with the classical transcripts of all 2n
/// sessions. `shot` selects the RNG stream under `cfg.seed`.
pub fn run_trajectory_once(cfg: &DqaConfig, shot: u64) -> Result<(u64, Vec<SessionTranscript>)> {
    cfg.validate()?;
    check_capacity(2 * (cfg.m() + 1), cfg.max_qubits, "column fan-out")?;
    check_capacity(cfg.n, cfg.max_qubits, "server register")?;
    let mut rng = shot_rng(cfg.seed, shot);
    trajectory_run(cfg, &mut rng)
}

/// Histogram over `cfg.shots` independent trajectories.
pub fn sample_trajectory(cfg: &DqaConfig) -> Result<Histogram> {
    if cfg.shots == 0 {
        return Err(Error::InvalidConfig("shots must be positive".into()));
    }
    cfg.validate()?;
    check_capacity(2 * (cfg.m() + 1), cfg.max_qubits, "column fan-out")?;
    check_capacity(cfg.n, cfg.max_qubits, "server register")?;
    let mut counts = vec![0u64; 1 << cfg.n];
    for shot in 0..cfg.shots {
        let mut rng = shot_rng(cfg.seed, shot);
        let (outcome, _) = trajectory_run(cfg, &mut rng)?;
        counts[outcome as usize] += 1;
    }
    Histogram::new(cfg.n, counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseKind;

    fn noisy(kind: NoiseKind, p: f64) -> NoiseModel {
        NoiseModel::new(kind, p).unwrap()
    }

    #[test]
    fn correct_sum_wraps() {
        assert_eq!(correct_sum(&[3, 4], 3), 7);
        assert_eq!(correct_sum(&[3, 4], 2), 3);
        assert_eq!(correct_sum(&[u64::MAX, u64::MAX, 5], 4), {
            ((u64::MAX as u128 * 2 + 5) % 16) as u64
        });
    }

    #[test]
    fn phase_angle_examples() {
        let two_pi = 2.0 * PI;
        assert!((party_phase_angle(4, 0, 3) - two_pi * 4.0 / 8.0).abs() < 1e-15);
        assert!((party_phase_angle(1, 2, 3) - PI).abs() < 1e-15);
        assert_eq!(party_phase_angle(8, 0, 3), 0.0);
        assert!((party_phase_angle(7, 1, 3) - two_pi * 3.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn noiseless_run_is_point_mass_on_the_sum() {
        for (inputs, n) in [(vec![3u64, 4], 3), (vec![3, 4], 2), (vec![1, 2, 3], 4)] {
            let expect = correct_sum(&inputs, n);
            let cfg = DqaConfig::new(inputs, n);
            let dist = run_exact_factorized(&cfg).unwrap();
            assert!(dist.prob(expect) >= 1.0 - 1e-10, "n={n}");
        }
    }

    #[test]
    fn engines_agree_noiseless_and_noisy() {
        for noise in [
            NoiseModel::none(),
            noisy(NoiseKind::Dephasing, 0.3),
            noisy(NoiseKind::Depolarising, 0.3),
        ] {
            let cfg = DqaConfig::new(vec![1, 2], 2).with_noise(noise);
            let fact = run_exact_factorized(&cfg).unwrap();
            let full = run_exact_full(&cfg).unwrap();
            assert!(
                fact.max_abs_diff(&full) < tol::ENGINE_MATCH,
                "noise={noise:?} diff={}",
                fact.max_abs_diff(&full)
            );
        }
    }

    #[test]
    fn extracted_channel_matches_explicit_session() {
        for kind in [NoiseKind::Dephasing, NoiseKind::Depolarising] {
            for m in 1..=2 {
                let noise = noisy(kind, 0.25);
                let ch = fanout_channel(m, &noise, 12).unwrap();
                // A register with nontrivial phases on every qubit.
                let mut reg = DensityMatrix::zero_state(m + 1);
                for q in 0..=m {
                    reg.apply_unitary_in_place(&Unitary::hadamard(), &[q]).unwrap();
                    reg.apply_unitary_in_place(&Unitary::phase(0.3 + q as f64), &[q]).unwrap();
                }
                let targets: Vec<usize> = (0..=m).collect();
                let via_channel = reg.apply_kraus(&ch, &targets).unwrap();
                let ghz = generate_noisy_ghz(m + 1, &noise).unwrap();
                let receivers: Vec<usize> = (1..=m).collect();
                let explicit = fanout_deferred(&reg, 0, &receivers, &ghz).unwrap();
                assert!(
                    via_channel.max_abs_diff(&explicit) < 1e-10,
                    "kind={kind:?} m={m} diff={}",
                    via_channel.max_abs_diff(&explicit)
                );
            }
        }
    }

    #[test]
    fn column_state_matches_coherence_law() {
        // diag = 1/2 exactly; |ρ01| = a/2 with a = (1-p)^(2(m+1)); the phase
        // of ρ10 is the column angle of the summed inputs.
        let inputs = vec![1u64, 2];
        let n = 3;
        let p = 0.2;
        for kind in [NoiseKind::Dephasing, NoiseKind::Depolarising] {
            let cfg = DqaConfig::new(inputs.clone(), n).with_noise(noisy(kind, p));
            let a = (1.0 - p).powi(2 * (cfg.m() as i32 + 1));
            for s in 0..n {
                let rho = server_column_state(&cfg, s).unwrap();
                assert!((rho.entry(0, 0).re - 0.5).abs() < 1e-12);
                assert!((2.0 * rho.entry(0, 1).norm() - a).abs() < 1e-12, "{kind:?} s={s}");
                let theta = party_phase_angle(correct_sum(&inputs, n), s, n);
                let got = rho.entry(1, 0).arg().rem_euclid(2.0 * PI);
                let want = theta.rem_euclid(2.0 * PI);
                let wrap = (got - want).abs().min(2.0 * PI - (got - want).abs());
                assert!(wrap < 1e-9, "{kind:?} s={s}: got {got} want {want}");
            }
        }
    }

    #[test]
    fn fidelity_fit_matches_round_count() {
        let p = 0.15;
        for kind in [NoiseKind::Dephasing, NoiseKind::Depolarising] {
            let cfg = DqaConfig::new(vec![1, 2], 2).with_noise(noisy(kind, p));
            let a = fit_fidelity_param(&cfg).unwrap();
            assert!((a - (1.0 - p).powi(6)).abs() < 1e-12, "{kind:?}");
            let ent_only = fit_fidelity_param(
                &cfg.clone().with_noise_rounds(NoiseRounds::EntangleOnly),
            )
            .unwrap();
            assert!((ent_only - (1.0 - p).powi(3)).abs() < 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn sampling_is_deterministic_and_converges() {
        let cfg = DqaConfig::new(vec![1, 1, 1, 1], 3)
            .with_noise(noisy(NoiseKind::Dephasing, 0.14))
            .with_shots(3000)
            .with_seed(11);
        let h1 = sample(&cfg).unwrap();
        let h2 = sample(&cfg).unwrap();
        assert_eq!(h1, h2);
        let h3 = sample(&cfg.clone().with_seed(12)).unwrap();
        assert_ne!(h1, h3);
        let dist = run_exact(&cfg).unwrap();
        assert!(h1.total_variation_vs(&dist) < 0.05);
        assert_eq!(h1.shots(), 3000);
    }

    #[test]
    fn noiseless_trajectories_always_read_the_sum() {
        let cfg = DqaConfig::new(vec![2, 3], 3).with_shots(40).with_seed(3);
        let hist = sample_trajectory(&cfg).unwrap();
        assert_eq!(hist.counts()[5], 40);
    }

    #[test]
    fn trajectory_histogram_converges_to_exact() {
        let cfg = DqaConfig::new(vec![1, 2], 2)
            .with_noise(noisy(NoiseKind::Depolarising, 0.3))
            .with_shots(3000)
            .with_seed(21);
        let hist = sample_trajectory(&cfg).unwrap();
        let dist = run_exact(&cfg).unwrap();
        assert!(
            hist.total_variation_vs(&dist) < 0.05,
            "tv={}",
            hist.total_variation_vs(&dist)
        );
    }

    #[test]
    fn trajectory_transcripts_cover_all_sessions() {
        let cfg = DqaConfig::new(vec![1, 2, 3], 2).with_noise(noisy(NoiseKind::Dephasing, 0.5));
        let (_, transcripts) = run_trajectory_once(&cfg, 7).unwrap();
        assert_eq!(transcripts.len(), 2 * cfg.n);
        for pair in transcripts.chunks(2) {
            assert_eq!(pair[0].session, crate::ghzlink::SessionKind::Entangle);
            assert_eq!(pair[1].session, crate::ghzlink::SessionKind::Disentangle);
            assert_eq!(pair[0].messages.len(), 1 + cfg.m());
            assert_eq!(pair[1].messages.len(), 1 + cfg.m());
        }
        // Same stream, same result.
        let (o1, t1) = run_trajectory_once(&cfg, 7).unwrap();
        let (o2, t2) = run_trajectory_once(&cfg, 7).unwrap();
        assert_eq!(o1, o2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn capacity_limits_are_enforced() {
        // Factorized: column fan-out needs 2(m+1) qubits.
        let cfg = DqaConfig::new(vec![1; 6], 2);
        assert!(matches!(
            run_exact_factorized(&cfg),
            Err(Error::Capacity { needed: 14, limit: 12, what: "column fan-out" })
        ));
        // Full engine: n(m+1) data qubits.
        let cfg = DqaConfig::new(vec![1; 3], 4).with_engine(Engine::Full);
        assert!(matches!(
            run_exact_full(&cfg),
            Err(Error::Capacity { needed: 16, limit: 12, what: "full register" })
        ));
        // Full engine: extraction peak 3(m+1) even when n(m+1) fits.
        let cfg = DqaConfig::new(vec![1; 4], 2).with_engine(Engine::Full);
        assert!(matches!(
            run_exact_full(&cfg),
            Err(Error::Capacity { needed: 15, limit: 12, what: "channel extraction" })
        ));
    }

    #[test]
    fn input_order_does_not_matter() {
        let d1 = run_exact_factorized(
            &DqaConfig::new(vec![5, 1], 3).with_noise(noisy(NoiseKind::Dephasing, 0.3)),
        )
        .unwrap();
        let d2 = run_exact_factorized(
            &DqaConfig::new(vec![1, 5], 3).with_noise(noisy(NoiseKind::Dephasing, 0.3)),
        )
        .unwrap();
        assert!(d1.max_abs_diff(&d2) < 1e-12);
    }
}

//! Trusted-party-free multiparty totals: m rounds of the distributed adder
//! over Shamir shares with a rotating server.
//!
//! Party `i` hides its input `X_i` in a degree `t-1` polynomial `g_i` and
//! submits the share `g_i(r)` to round `r`'s adder, hosted by party `r`.
//! Round `r` therefore accumulates `G(r) = Σ_i g_i(r)` — a share of the total
//! under the sum polynomial `G = Σ g_i`. After the m rounds, any `t` of the
//! observed sums, reduced mod q, interpolate to `G(0) = Σ_i X_i mod q`. No
//! party ever submits a raw input and no round's host learns more than a
//! share-sum.
//!
//! Each round's accumulator is `required_bits(m, q)` wide, so the integer
//! share-sum never wraps mod 2^n before the classical mod-q reduction.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::analytic::peak_probability;
use crate::dqa::{correct_sum, fit_fidelity_param, run_exact, DqaConfig, Engine, OutcomeDistribution};
use crate::noise::NoiseModel;
use crate::sss::{reconstruct, PrimeField, SecretPolynomial, Share};
use crate::{Error, Result, DEFAULT_MAX_QUBITS};

// Supplies f64 math (sqrt, cos, ...) when no dependency pulls in std.
// Whenever std does enter the build graph (tests, std-enabled consumers),
// the inherent methods shadow these and the import goes unused.
#[allow(unused_imports)]
use num_traits::Float;

/// Residue classes with less probability than this are dropped from exact
/// tuple enumeration; the discarded total is reported as `pruned_mass`.
pub const DEFAULT_PRUNE_BELOW: f64 = 1e-12;

/// Cap on the number of round-outcome tuples exact enumeration may visit.
pub const DEFAULT_ENUMERATION_LIMIT: u128 = 4_000_000;

/// Accumulator width that keeps `Σ_i g_i(r)` from wrapping: the bit length of
/// `m·(q-1)`, the largest possible share-sum.
pub fn required_bits(m: usize, q: u64) -> usize {
    let max_sum = m as u128 * (q as u128 - 1);
    (128 - max_sum.leading_zeros()).max(1) as usize
}

/// Full description of one trusted-party-free summation.
#[derive(Clone, Debug)]
pub struct NtpaConfig {
    /// Party inputs `X_i`, each a field element below `modulus`.
    pub inputs: Vec<u64>,
    /// Shares needed to reconstruct; polynomials have degree `threshold - 1`.
    pub threshold: usize,
    /// The prime field modulus q; must exceed the number of parties.
    pub modulus: u64,
    pub noise: NoiseModel,
    pub engine: Engine,
    /// Trials for the sampling entry point.
    pub shots: u64,
    pub seed: u64,
    /// Which rounds' results to interpolate (1-based, exactly `threshold`
    /// of them); `None` means the first `threshold` rounds.
    pub use_rounds: Option<Vec<u64>>,
    /// Per-round residue-mass floor for exact enumeration.
    pub prune_below: f64,
    /// Cap on exact-enumeration tuple count.
    pub enumeration_limit: u128,
    /// Ceiling on simultaneously simulated qubits, passed through to the adder.
    pub max_qubits: usize,
}

impl NtpaConfig {
    pub fn new(inputs: Vec<u64>, threshold: usize, modulus: u64) -> Self {
        NtpaConfig {
            inputs,
            threshold,
            modulus,
            noise: NoiseModel::none(),
            engine: Engine::Factorized,
            shots: 2000,
            seed: 0,
            use_rounds: None,
            prune_below: DEFAULT_PRUNE_BELOW,
            enumeration_limit: DEFAULT_ENUMERATION_LIMIT,
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

    pub fn with_use_rounds(mut self, rounds: Vec<u64>) -> Self {
        self.use_rounds = Some(rounds);
        self
    }

    pub fn with_prune_below(mut self, prune_below: f64) -> Self {
        self.prune_below = prune_below;
        self
    }

    pub fn with_max_qubits(mut self, max_qubits: usize) -> Self {
        self.max_qubits = max_qubits;
        self
    }

    /// Number of parties (and of protocol rounds).
    pub fn m(&self) -> usize {
        self.inputs.len()
    }

    /// Accumulator width used by every round.
    pub fn n_bits(&self) -> usize {
        required_bits(self.m(), self.modulus)
    }

    pub fn field(&self) -> Result<PrimeField> {
        PrimeField::new(self.modulus)
    }

    /// The true total `Σ X_i mod q`.
    pub fn expected_total(&self) -> u64 {
        let q = self.modulus as u128;
        (self.inputs.iter().fold(0u128, |acc, &x| (acc + x as u128) % q)) as u64
    }

    /// The 1-based rounds whose results feed reconstruction.
    pub fn rounds_used(&self) -> Result<Vec<u64>> {
        let m = self.m() as u64;
        match &self.use_rounds {
            None => Ok((1..=self.threshold as u64).collect()),
            Some(rounds) => {
                if rounds.len() != self.threshold {
                    return Err(Error::InvalidConfig(alloc::format!(
                        "{} rounds selected but threshold is {}",
                        rounds.len(),
                        self.threshold
                    )));
                }
                for (i, &r) in rounds.iter().enumerate() {
                    if r == 0 || r > m {
                        return Err(Error::InvalidConfig(alloc::format!(
                            "selected round {r} outside 1..={m}"
                        )));
                    }
                    if rounds[..i].contains(&r) {
                        return Err(Error::InvalidConfig(alloc::format!(
                            "round {r} selected twice"
                        )));
                    }
                }
                Ok(rounds.clone())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if m == 0 {
            return Err(Error::InvalidConfig("at least one party is required".into()));
        }
        if self.threshold == 0 || self.threshold > m {
            return Err(Error::InvalidConfig(alloc::format!(
                "threshold {} outside 1..={m}",
                self.threshold
            )));
        }
        if self.modulus <= m as u64 {
            return Err(Error::InvalidConfig(alloc::format!(
                "modulus {} must exceed the party count {m} for distinct share points",
                self.modulus
            )));
        }
        let field = self.field()?;
        for &x in &self.inputs {
            field.element(x)?;
        }
        self.rounds_used()?;
        if !(0.0..1.0).contains(&self.prune_below) {
            return Err(Error::InvalidConfig(alloc::format!(
                "prune_below {} outside [0, 1)",
                self.prune_below
            )));
        }
        if self.enumeration_limit == 0 {
            return Err(Error::InvalidConfig("enumeration limit must be positive".into()));
        }
        Ok(())
    }
}

/// splitmix64 finalizer: decorrelates derived seed streams.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seed for the dealer's polynomial coefficients.
fn dealing_seed(seed: u64) -> u64 {
    mix(seed ^ 0x6465616c)
}

/// Seed for the measurement draw of one `(trial, round)` cell; rounds and
/// trials get independent streams so skipping unused rounds never shifts
/// another round's draw.
fn round_seed(seed: u64, trial: u64, round: u64) -> u64 {
    mix(mix(seed ^ mix(trial)) ^ mix(round.wrapping_mul(0xA24BAED4963EE407)))
}

/// Draws each party's sharing polynomial. Deterministic in `cfg.seed`.
pub fn deal_polynomials(cfg: &NtpaConfig) -> Result<Vec<SecretPolynomial>> {
    cfg.validate()?;
    let field = cfg.field()?;
    let mut rng = ChaCha12Rng::seed_from_u64(dealing_seed(cfg.seed));
    cfg.inputs
        .iter()
        .map(|&x| SecretPolynomial::generate(field, x, cfg.threshold, &mut rng))
        .collect()
}

/// What one round of the protocol produced.
#[derive(Clone, Debug)]
pub struct RoundResult {
    /// 1-based round index; doubles as the share evaluation point.
    pub round: u64,
    /// The party hosting this round's adder (party `round`; the quantum math
    /// is role-symmetric, so this is bookkeeping for the trust argument).
    pub server_party: u64,
    /// Accumulator width used.
    pub n_bits: usize,
    /// The values the parties actually submitted — shares, never raw inputs.
    pub shares: Vec<u64>,
    /// True integer share-sum (never wraps at `n_bits`).
    pub share_sum: u64,
    /// Exact outcome distribution of this round's adder.
    pub distribution: OutcomeDistribution,
    /// The outcome drawn for this run.
    pub outcome: u64,
}

fn draw<R: Rng + ?Sized>(dist: &OutcomeDistribution, rng: &mut R) -> u64 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (x, &p) in dist.probs().iter().enumerate() {
        acc += p;
        if u < acc {
            return x as u64;
        }
    }
    dist.probs().len() as u64 - 1
}

fn round_dqa_config(
    shares: &[u64],
    n_bits: usize,
    noise: NoiseModel,
    engine: Engine,
    max_qubits: usize,
) -> DqaConfig {
    DqaConfig::new(shares.to_vec(), n_bits)
        .with_noise(noise)
        .with_engine(engine)
        .with_max_qubits(max_qubits)
}

/// Runs round `round`: an adder over the given shares at width `n_bits`,
/// drawing one outcome with the given seed.
pub fn run_round(
    round: u64,
    shares: &[u64],
    n_bits: usize,
    noise: NoiseModel,
    engine: Engine,
    seed: u64,
    max_qubits: usize,
) -> Result<RoundResult> {
    let cfg = round_dqa_config(shares, n_bits, noise, engine, max_qubits);
    let distribution = run_exact(&cfg)?;
    let outcome = draw(&distribution, &mut ChaCha12Rng::seed_from_u64(seed));
    Ok(RoundResult {
        round,
        server_party: round,
        n_bits,
        shares: shares.to_vec(),
        share_sum: correct_sum(shares, n_bits),
        distribution,
        outcome,
    })
}

/// One full protocol execution.
#[derive(Clone, Debug)]
pub struct NtpaRun {
    pub n_bits: usize,
    pub modulus: u64,
    pub threshold: usize,
    /// All m rounds, in server order 1..=m.
    pub rounds: Vec<RoundResult>,
    /// The interpolation points actually used: `(round, outcome mod q)`.
    pub points: Vec<Share>,
    pub reconstructed: u64,
    /// The true total `Σ X_i mod q`.
    pub expected: u64,
}

impl NtpaRun {
    pub fn is_correct(&self) -> bool {
        self.reconstructed == self.expected
    }
}

fn run_trial(cfg: &NtpaConfig, polys: &[SecretPolynomial], trial: u64) -> Result<NtpaRun> {
    let field = cfg.field()?;
    let n_bits = cfg.n_bits();
    let mut rounds = Vec::with_capacity(cfg.m());
    for r in 1..=cfg.m() as u64 {
        let shares: Vec<u64> = polys.iter().map(|g| g.eval(r)).collect();
        rounds.push(run_round(
            r,
            &shares,
            n_bits,
            cfg.noise,
            cfg.engine,
            round_seed(cfg.seed, trial, r),
            cfg.max_qubits,
        )?);
    }
    let points: Vec<Share> = cfg
        .rounds_used()?
        .iter()
        .map(|&r| Share { x: r, y: rounds[(r - 1) as usize].outcome % cfg.modulus })
        .collect();
    let reconstructed = reconstruct(&field, &points)?;
    Ok(NtpaRun {
        n_bits,
        modulus: cfg.modulus,
        threshold: cfg.threshold,
        rounds,
        points,
        reconstructed,
        expected: cfg.expected_total(),
    })
}

/// Deals polynomials, runs the m rounds with fresh independent noise, and
/// reconstructs the total from the selected rounds' residues.
pub fn run_ntpa(cfg: &NtpaConfig) -> Result<NtpaRun> {
    let polys = deal_polynomials(cfg)?;
    run_trial(cfg, &polys, 0)
}

/// Outcome of repeated protocol executions with shared polynomials.
#[derive(Clone, Debug)]
pub struct NtpaSample {
    /// Reconstructed value per trial.
    pub values: Vec<u64>,
    /// Empirical distribution of reconstructed values over [0, q).
    pub frequencies: Vec<f64>,
    pub expected: u64,
    /// Fraction of trials that reconstructed the true total.
    pub success_rate: f64,
}

/// Runs `cfg.shots` independent executions. The dealing is done once (trials
/// share polynomials); only the rounds feeding reconstruction are drawn, which
/// leaves every trial's result identical to a full `run_ntpa` with the same
/// trial index because each `(trial, round)` draw has its own seed stream.
pub fn run_ntpa_trials(cfg: &NtpaConfig) -> Result<NtpaSample> {
    let polys = deal_polynomials(cfg)?;
    let field = cfg.field()?;
    let n_bits = cfg.n_bits();
    let used = cfg.rounds_used()?;
    // One exact distribution per used round, then cheap draws per trial.
    let mut dists = Vec::with_capacity(used.len());
    for &r in &used {
        let shares: Vec<u64> = polys.iter().map(|g| g.eval(r)).collect();
        let dqa = round_dqa_config(&shares, n_bits, cfg.noise, cfg.engine, cfg.max_qubits);
        dists.push(run_exact(&dqa)?);
    }
    let expected = cfg.expected_total();
    let mut values = Vec::with_capacity(cfg.shots as usize);
    let mut counts = vec![0u64; cfg.modulus as usize];
    let mut successes = 0u64;
    for trial in 0..cfg.shots {
        let points: Vec<Share> = used
            .iter()
            .zip(&dists)
            .map(|(&r, dist)| {
                let mut rng = ChaCha12Rng::seed_from_u64(round_seed(cfg.seed, trial, r));
                Share { x: r, y: draw(dist, &mut rng) % cfg.modulus }
            })
            .collect();
        let value = reconstruct(&field, &points)?;
        counts[value as usize] += 1;
        if value == expected {
            successes += 1;
        }
        values.push(value);
    }
    let total = cfg.shots.max(1) as f64;
    Ok(NtpaSample {
        values,
        frequencies: counts.into_iter().map(|c| c as f64 / total).collect(),
        expected,
        success_rate: successes as f64 / total,
    })
}

/// Exact distribution of the reconstructed value, obtained by pushing every
/// tuple of round outcomes (merged into residue classes, pruned below
/// `prune_below`) through the interpolation map.
#[derive(Clone, Debug)]
pub struct ReconstructionDistribution {
    pub modulus: u64,
    pub expected: u64,
    /// `probs[v]` = probability the protocol reconstructs `v`.
    pub probs: Vec<f64>,
    /// Upper bound on the probability mass lost to pruning.
    pub pruned_mass: f64,
    /// Residue tuples enumerated.
    pub tuples_visited: u128,
}

impl ReconstructionDistribution {
    /// Probability of reconstructing the true total.
    pub fn success_probability(&self) -> f64 {
        self.probs[self.expected as usize]
    }
}

fn enumerate_tuples(
    field: &PrimeField,
    kept: &[Vec<(u64, f64)>],
    depth: usize,
    value: u64,
    prob: f64,
    probs: &mut [f64],
) {
    if depth == kept.len() {
        probs[value as usize] += prob;
        return;
    }
    for &(contrib, p) in &kept[depth] {
        enumerate_tuples(field, kept, depth + 1, field.add(value, contrib), prob * p, probs);
    }
}

/// Exact-mode evaluation of the protocol: per-round exact adder
/// distributions, residue merging, and enumeration over the rounds feeding
/// reconstruction.
pub fn reconstruction_distribution(cfg: &NtpaConfig) -> Result<ReconstructionDistribution> {
    let polys = deal_polynomials(cfg)?;
    let field = cfg.field()?;
    let q = cfg.modulus;
    let n_bits = cfg.n_bits();
    let used = cfg.rounds_used()?;

    // Lagrange weights at 0 for the fixed interpolation points, so each
    // round contributes `weight·residue` additively.
    let mut weights = Vec::with_capacity(used.len());
    for &xi in &used {
        let mut num = 1u64;
        let mut den = 1u64;
        for &xj in &used {
            if xj == xi {
                continue;
            }
            num = field.mul(num, xj);
            den = field.mul(den, field.sub(xj, xi));
        }
        weights.push(field.mul(num, field.inv(den)?));
    }

    let mut kept: Vec<Vec<(u64, f64)>> = Vec::with_capacity(used.len());
    let mut kept_mass = 1.0f64;
    for (&r, &w) in used.iter().zip(&weights) {
        let shares: Vec<u64> = polys.iter().map(|g| g.eval(r)).collect();
        let dqa = round_dqa_config(&shares, n_bits, cfg.noise, cfg.engine, cfg.max_qubits);
        let dist = run_exact(&dqa)?;
        // Outcomes are interchangeable within a residue class: merge first,
        // then prune, then fold the Lagrange weight in.
        let mut residue_mass = vec![0.0f64; q as usize];
        for (o, &p) in dist.probs().iter().enumerate() {
            residue_mass[(o as u64 % q) as usize] += p;
        }
        let classes: Vec<(u64, f64)> = residue_mass
            .iter()
            .enumerate()
            .filter(|(_, &p)| p >= cfg.prune_below && p > 0.0)
            .map(|(res, &p)| (field.mul(w, res as u64), p))
            .collect();
        kept_mass *= classes.iter().map(|&(_, p)| p).sum::<f64>();
        kept.push(classes);
    }

    let tuples_visited =
        kept.iter().fold(1u128, |acc, k| acc.saturating_mul(k.len() as u128));
    if tuples_visited > cfg.enumeration_limit {
        return Err(Error::EnumerationTooLarge {
            states: tuples_visited,
            limit: cfg.enumeration_limit,
        });
    }

    let mut probs = vec![0.0f64; q as usize];
    enumerate_tuples(&field, &kept, 0, 0, 1.0, &mut probs);
    Ok(ReconstructionDistribution {
        modulus: q,
        expected: cfg.expected_total(),
        probs,
        pruned_mass: (1.0 - kept_mass).max(0.0),
        tuples_visited,
    })
}

/// Probability that exact-mode reconstruction yields the true total.
pub fn success_probability(cfg: &NtpaConfig) -> Result<f64> {
    Ok(reconstruction_distribution(cfg)?.success_probability())
}

/// `((1+a)/2)^(n_bits·t)`: the probability that every round feeding
/// reconstruction reads its share-sum exactly, with `a` calibrated from the
/// engine. Reconstruction can also succeed through compensating errors, so
/// this lower-bounds [`success_probability`].
pub fn success_lower_bound(cfg: &NtpaConfig) -> Result<f64> {
    cfg.validate()?;
    let probe = DqaConfig::new(vec![0; cfg.m()], cfg.n_bits())
        .with_noise(cfg.noise)
        .with_engine(cfg.engine)
        .with_max_qubits(cfg.max_qubits);
    let a = fit_fidelity_param(&probe)?;
    Ok(peak_probability(cfg.n_bits(), a).powi(cfg.threshold as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseKind;
    use proptest::prelude::*;

    #[test]
    fn required_bits_examples() {
        assert_eq!(required_bits(2, 11), 5);
        assert_eq!(required_bits(1, 2), 1);
        assert_eq!(required_bits(3, 101), 9);
        assert_eq!(required_bits(1, 101), 7);
    }

    proptest! {
        #[test]
        fn share_sums_never_wrap(m in 1usize..=6, q_idx in 0usize..6, xs in proptest::collection::vec(0u64..1000, 6)) {
            let primes = [2u64, 3, 11, 101, 499, 997];
            let q = primes[q_idx];
            let n = required_bits(m, q);
            let sum: u128 = xs[..m].iter().map(|&x| (x % q) as u128).sum();
            prop_assert!(sum < (1u128 << n));
        }
    }

    #[test]
    fn noiseless_end_to_end() {
        let cfg = NtpaConfig::new(alloc::vec![3, 4], 2, 11);
        let run = run_ntpa(&cfg).unwrap();
        assert_eq!(run.expected, 7);
        assert_eq!(run.reconstructed, 7);
        assert!(run.is_correct());
        assert_eq!(run.rounds.len(), 2);
        for (i, round) in run.rounds.iter().enumerate() {
            assert_eq!(round.round, i as u64 + 1);
            assert_eq!(round.server_party, i as u64 + 1);
            // Noiseless rounds read the share-sum with certainty.
            assert_eq!(round.outcome, round.share_sum);
            assert!((round.distribution.prob(round.share_sum) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_single_party_returns_its_input() {
        let cfg = NtpaConfig::new(alloc::vec![5], 1, 7);
        let run = run_ntpa(&cfg).unwrap();
        assert_eq!(run.reconstructed, 5);
        assert_eq!(run.n_bits, required_bits(1, 7));
    }

    #[test]
    fn share_sums_stay_below_width_even_at_extremes() {
        // All parties hold q-1, the largest field element.
        let cfg = NtpaConfig::new(alloc::vec![6, 6, 6], 2, 7);
        let run = run_ntpa(&cfg).unwrap();
        assert_eq!(run.expected, 18 % 7);
        assert!(run.is_correct());
        for round in &run.rounds {
            assert!(round.share_sum < 1 << run.n_bits);
        }
    }

    #[test]
    fn every_threshold_subset_reconstructs_the_same_total_noiselessly() {
        let base = NtpaConfig::new(alloc::vec![9, 2, 7], 2, 11);
        let expected = base.expected_total();
        for subset in [alloc::vec![1, 2], alloc::vec![1, 3], alloc::vec![2, 3], alloc::vec![3, 1]] {
            let cfg = base.clone().with_use_rounds(subset.clone());
            let run = run_ntpa(&cfg).unwrap();
            assert_eq!(run.reconstructed, expected, "subset {subset:?}");
        }
    }

    #[test]
    fn round_inputs_are_shares_not_raw_inputs() {
        let cfg = NtpaConfig::new(alloc::vec![3, 4, 5], 2, 11);
        let polys = deal_polynomials(&cfg).unwrap();
        let run = run_ntpa(&cfg).unwrap();
        for round in &run.rounds {
            let expected_shares: Vec<u64> = polys.iter().map(|g| g.eval(round.round)).collect();
            assert_eq!(round.shares, expected_shares);
        }
        // With threshold ≥ 2 the evaluation at a nonzero point moves every
        // degree-1 share off the raw input (the slope is nonzero mod q).
        for round in &run.rounds {
            for (share, &raw) in round.shares.iter().zip(&cfg.inputs) {
                assert_ne!(*share, raw);
            }
        }
    }

    #[test]
    fn per_round_distribution_matches_closed_form() {
        let noise = NoiseModel::new(NoiseKind::Dephasing, 0.2).unwrap();
        let cfg = NtpaConfig::new(alloc::vec![3, 4], 2, 11).with_noise(noise);
        let polys = deal_polynomials(&cfg).unwrap();
        let run = run_ntpa(&cfg).unwrap();
        let probe = DqaConfig::new(alloc::vec![0, 0], cfg.n_bits()).with_noise(noise);
        let a = fit_fidelity_param(&probe).unwrap();
        for round in &run.rounds {
            let model =
                crate::analytic::analytic_distribution(&round.shares, round.n_bits, a).unwrap();
            assert!(round.distribution.max_abs_diff(&model) < crate::tol::ENGINE_MATCH);
        }
        let _ = polys;
    }

    #[test]
    fn runs_are_reproducible_and_seed_sensitive() {
        let noise = NoiseModel::new(NoiseKind::Depolarising, 0.4).unwrap();
        let cfg = NtpaConfig::new(alloc::vec![3, 4], 2, 11).with_noise(noise).with_seed(42);
        let a = run_ntpa(&cfg).unwrap();
        let b = run_ntpa(&cfg).unwrap();
        assert_eq!(a.reconstructed, b.reconstructed);
        assert_eq!(
            a.rounds.iter().map(|r| r.outcome).collect::<Vec<_>>(),
            b.rounds.iter().map(|r| r.outcome).collect::<Vec<_>>()
        );
        let c = run_ntpa(&cfg.clone().with_seed(43)).unwrap();
        let outcomes_a: Vec<u64> = a.rounds.iter().map(|r| r.outcome).collect();
        let outcomes_c: Vec<u64> = c.rounds.iter().map(|r| r.outcome).collect();
        // Different polynomials (different dealing seed) make equality of all
        // share-sums overwhelmingly unlikely; the outcomes derive from them.
        assert!(
            outcomes_a != outcomes_c
                || a.rounds.iter().map(|r| r.share_sum).collect::<Vec<_>>()
                    != c.rounds.iter().map(|r| r.share_sum).collect::<Vec<_>>()
        );
    }

    #[test]
    fn trials_agree_with_single_runs_and_converge() {
        let noise = NoiseModel::new(NoiseKind::Dephasing, 0.3).unwrap();
        let cfg =
            NtpaConfig::new(alloc::vec![3, 4], 2, 11).with_noise(noise).with_seed(7).with_shots(400);
        let sample = run_ntpa_trials(&cfg).unwrap();
        assert_eq!(sample.values.len(), 400);
        // Trial 0 of the batch is the same execution as run_ntpa.
        assert_eq!(sample.values[0], run_ntpa(&cfg).unwrap().reconstructed);
        let exact = reconstruction_distribution(&cfg).unwrap();
        let tv: f64 = sample
            .frequencies
            .iter()
            .zip(&exact.probs)
            .map(|(f, p)| (f - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.08, "sampled vs exact reconstruction TV {tv}");
        assert!((sample.success_rate - exact.success_probability()).abs() < 0.08);
    }

    #[test]
    fn exact_mode_is_certain_when_noiseless() {
        let cfg = NtpaConfig::new(alloc::vec![9, 2, 7], 3, 11);
        let dist = reconstruction_distribution(&cfg).unwrap();
        assert!((dist.success_probability() - 1.0).abs() < 1e-9);
        assert!(dist.pruned_mass < 1e-9);
        assert_eq!(dist.tuples_visited, 1);
    }

    #[test]
    fn success_probability_beats_the_all_rounds_correct_bound() {
        for p in [0.1, 0.3, 0.6] {
            let noise = NoiseModel::new(NoiseKind::Dephasing, p).unwrap();
            let cfg = NtpaConfig::new(alloc::vec![3, 4], 2, 11).with_noise(noise);
            let exact = success_probability(&cfg).unwrap();
            let bound = success_lower_bound(&cfg).unwrap();
            assert!(
                exact >= bound - 1e-12,
                "p={p}: exact {exact} below bound {bound}"
            );
            assert!(exact <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn success_probability_is_non_increasing_in_threshold_at_moderate_noise() {
        for p in [0.02, 0.05, 0.1, 0.15] {
            let noise = NoiseModel::new(NoiseKind::Depolarising, p).unwrap();
            let mut last = f64::INFINITY;
            for t in 1..=3 {
                let cfg = NtpaConfig::new(alloc::vec![2, 5, 6], t, 7).with_noise(noise);
                let prob = success_probability(&cfg).unwrap();
                assert!(prob <= last + 1e-12, "p={p} t={t}: {prob} > {last}");
                last = prob;
            }
        }
    }

    #[test]
    fn threshold_monotonicity_breaks_down_at_heavy_noise() {
        // Near total dephasing every threshold's success collapses toward the
        // random-guess rate 1/q, and the mod-2^n → mod-q aliasing can leave a
        // single round's correct residue class with fewer aliases than
        // average: t=1 then scores *below* t=2. Only the all-rounds-correct
        // lower bound survives at every noise level; monotonicity in t is a
        // moderate-noise phenomenon.
        let noise = NoiseModel::new(NoiseKind::Depolarising, 0.25).unwrap();
        let single = success_probability(
            &NtpaConfig::new(alloc::vec![2, 5, 6], 1, 7).with_noise(noise),
        )
        .unwrap();
        let pair = success_probability(
            &NtpaConfig::new(alloc::vec![2, 5, 6], 2, 7).with_noise(noise),
        )
        .unwrap();
        assert!(single < pair, "expected the aliasing counterexample: {single} vs {pair}");
        assert!((single - 1.0 / 7.0).abs() < 0.02);
        assert!((pair - 1.0 / 7.0).abs() < 0.02);
    }

    #[test]
    fn full_noise_matches_classical_uniform_enumeration() {
        // At p=1 the depolarising adder is a uniform source; the protocol
        // output must match pushing independent uniform outcomes through the
        // residue + interpolation map.
        let noise = NoiseModel::new(NoiseKind::Depolarising, 1.0).unwrap();
        let cfg = NtpaConfig::new(alloc::vec![1, 2], 2, 3).with_noise(noise);
        let dist = reconstruction_distribution(&cfg).unwrap();
        let field = PrimeField::new(3).unwrap();
        // Lagrange weights for points x=1,2: both 2 mod 3.
        let n = cfg.n_bits();
        let d = 1u64 << n;
        let mut classical = [0.0f64; 3];
        for o1 in 0..d {
            for o2 in 0..d {
                let v = field.add(field.mul(2, o1 % 3), field.mul(2, o2 % 3));
                classical[v as usize] += 1.0 / (d as f64 * d as f64);
            }
        }
        for v in 0..3 {
            assert!((dist.probs[v] - classical[v]).abs() < 1e-9, "v={v}");
        }
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let noise = NoiseModel::new(NoiseKind::Dephasing, 0.5).unwrap();
        let mut cfg = NtpaConfig::new(alloc::vec![3, 4], 2, 11).with_noise(noise);
        cfg.enumeration_limit = 4;
        assert!(matches!(
            reconstruction_distribution(&cfg),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn config_validation_rejects_bad_setups() {
        assert!(NtpaConfig::new(alloc::vec![], 1, 11).validate().is_err());
        assert!(NtpaConfig::new(alloc::vec![1, 2], 3, 11).validate().is_err());
        assert!(NtpaConfig::new(alloc::vec![1, 2], 0, 11).validate().is_err());
        // q must exceed m.
        assert!(NtpaConfig::new(alloc::vec![1, 0], 2, 2).validate().is_err());
        // Inputs must be field elements.
        assert!(matches!(
            NtpaConfig::new(alloc::vec![11, 0], 1, 11).validate(),
            Err(Error::NotAFieldElement { value: 11, .. })
        ));
        // Composite modulus.
        assert!(matches!(
            NtpaConfig::new(alloc::vec![1, 2], 2, 9).validate(),
            Err(Error::NotPrime(9))
        ));
        // Subset selection must have threshold size, be in range, distinct.
        assert!(NtpaConfig::new(alloc::vec![1, 2, 3], 2, 11)
            .with_use_rounds(alloc::vec![1])
            .validate()
            .is_err());
        assert!(NtpaConfig::new(alloc::vec![1, 2, 3], 2, 11)
            .with_use_rounds(alloc::vec![1, 4])
            .validate()
            .is_err());
        assert!(NtpaConfig::new(alloc::vec![1, 2, 3], 2, 11)
            .with_use_rounds(alloc::vec![2, 2])
            .validate()
            .is_err());
    }
}

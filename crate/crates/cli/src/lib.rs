//! Experiment runner for the distributed adder simulator.
//!
//! An experiment is described by a JSON config ([`ExperimentSpec`]), executed
//! by [`run_experiment`], and rendered to a JSON or CSV document plus an
//! optional polar-coordinate CSV export. All computation lives in `dqa-core`;
//! this crate only parses configs, dispatches, and serializes results.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use dqa_core::analytic::{
    analytic_distribution, check_power_of_two_dominance, check_proximity_ordering,
    check_reflection_symmetry, peak_probability, polar_coordinates, predicted_a, CheckReport,
};
use dqa_core::dqa::{
    correct_sum, fit_fidelity_param, run_exact, sample, sample_trajectory, DqaConfig, Engine,
    Histogram, NoiseRounds, OutcomeDistribution,
};
use dqa_core::noise::{NoiseKind, NoiseModel};
use dqa_core::ntpa::{
    reconstruction_distribution, run_ntpa, run_ntpa_trials, success_lower_bound, NtpaConfig,
};
use dqa_core::{tol, DEFAULT_MAX_QUBITS};

use serde::{Deserialize, Serialize};

/// Version stamp written into every emitted document and accepted in configs.
pub const SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

/// Error type carrying the process exit code policy: validation failures
/// exit 2, capacity/resource limits exit 3, I/O failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Capacity(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Capacity(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "validation error: {msg}"),
            CliError::Capacity(msg) => write!(f, "capacity error: {msg}"),
            CliError::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<dqa_core::Error> for CliError {
    fn from(e: dqa_core::Error) -> Self {
        if e.is_capacity() {
            CliError::Capacity(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(format!("config parse error: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------------------
// Experiment specification
// ---------------------------------------------------------------------------

/// What the invocation should compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Exact output distribution from a density-matrix engine.
    Exact,
    /// Finite-shot histogram drawn from an engine.
    Sample,
    /// Closed-form output distribution for a damping parameter `a`.
    Analytic,
    /// Empirical histogram vs. closed-form model, with TV and chi-square.
    Compare,
    /// Threshold secret-sharing adder protocol run.
    Ntpa,
    /// Structural distribution checks (reflection, dominance, proximity).
    Lemmas,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Sample => "sample",
            Mode::Analytic => "analytic",
            Mode::Compare => "compare",
            Mode::Ntpa => "ntpa",
            Mode::Lemmas => "lemmas",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "sample" => Ok(Mode::Sample),
            "analytic" => Ok(Mode::Analytic),
            "compare" => Ok(Mode::Compare),
            "ntpa" => Ok(Mode::Ntpa),
            "lemmas" => Ok(Mode::Lemmas),
            other => Err(CliError::Validation(format!(
                "unknown mode '{other}' (expected exact, sample, analytic, compare, ntpa, or lemmas)"
            ))),
        }
    }
}

/// Document encoding for the main artifact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(CliError::Validation(format!(
                "unknown format '{other}' (expected json or csv)"
            ))),
        }
    }
}

/// Which sampling path draws the histogram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    /// Draw i.i.d. outcomes from the exact distribution.
    Distribution,
    /// Simulate each shot as a stochastic pure-state trajectory.
    Trajectory,
}

/// Noise description: a kind plus exactly one of `p` (event probability) or
/// `half_p` (its half, the common reporting convention; `p = 2 * half_p`).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_p: Option<f64>,
}

impl NoiseSpec {
    /// Resolves to a noise model, enforcing the exactly-one-of rule.
    pub fn model(&self) -> Result<NoiseModel> {
        let p = match (self.p, self.half_p) {
            (Some(p), None) => p,
            (None, Some(h)) => 2.0 * h,
            (Some(_), Some(_)) => {
                return Err(CliError::Validation(
                    "give exactly one of 'p' and 'half_p', not both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Validation(
                    "noise needs a strength: give 'p' or 'half_p'".into(),
                ))
            }
        };
        Ok(NoiseModel::new(self.kind, p)?)
    }
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

/// JSON experiment config. Noise may be given either as a nested
/// `"noise": {"kind": ..., "p"|"half_p": ...}` object or as the flat
/// top-level keys `kind` + `p`/`half_p`; the two styles are exclusive.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    /// Optional; must agree with the command-line mode when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// Party inputs (adder summands, or secrets for the sharing protocol).
    #[serde(default)]
    pub inputs: Vec<u64>,
    /// Accumulator width in bits; derived from the input sum when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    /// Flat-style noise kind (alternative to the nested `noise` object).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<NoiseKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<Engine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_rounds: Option<NoiseRounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerKind>,
    /// Damping parameter for `analytic` mode (also accepted by `compare` and
    /// `lemmas` to pin the model instead of fitting/simulating).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Tolerance for the `lemmas` checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Reconstruction threshold (`ntpa` mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<usize>,
    /// Prime field modulus (`ntpa` mode); `prime` is accepted as an alias.
    #[serde(default, alias = "prime", skip_serializing_if = "Option::is_none")]
    pub modulus: Option<u64>,
    /// Which rounds feed reconstruction (`ntpa` mode; default first t).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub use_rounds: Option<Vec<u64>>,
    /// In `ntpa` mode, also compute the exact reconstruction distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prune_below: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enumeration_limit: Option<u64>,
    /// Output file path; the document goes to stdout when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
    /// Also export the distribution in polar coordinates (needs `out`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polar: Option<bool>,
    /// Ceiling on simultaneously simulated qubits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_qubits: Option<usize>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            schema_version: SCHEMA_VERSION,
            mode: None,
            inputs: Vec::new(),
            n: None,
            noise: None,
            kind: None,
            p: None,
            half_p: None,
            engine: None,
            noise_rounds: None,
            shots: None,
            seed: None,
            sampler: None,
            a: None,
            tol: None,
            threshold: None,
            modulus: None,
            use_rounds: None,
            exact: None,
            prune_below: None,
            enumeration_limit: None,
            out: None,
            format: None,
            polar: None,
            max_qubits: None,
        }
    }
}

impl ExperimentSpec {
    /// Parses a JSON config and checks the schema version.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        if spec.schema_version != SCHEMA_VERSION {
            return Err(CliError::Validation(format!(
                "unsupported schema_version {} (this build writes and reads version {})",
                spec.schema_version, SCHEMA_VERSION
            )));
        }
        Ok(spec)
    }

    /// Effective noise model from either the nested object or the flat keys.
    pub fn noise_model(&self) -> Result<NoiseModel> {
        let flat_given = self.kind.is_some() || self.p.is_some() || self.half_p.is_some();
        match (&self.noise, flat_given) {
            (Some(_), true) => Err(CliError::Validation(
                "give noise either as the nested 'noise' object or as flat keys, not both".into(),
            )),
            (Some(spec), false) => spec.model(),
            (None, true) => {
                let kind = self.kind.ok_or_else(|| {
                    CliError::Validation("'p'/'half_p' given without a noise 'kind'".into())
                })?;
                NoiseSpec { kind, p: self.p, half_p: self.half_p }.model()
            }
            (None, false) => Ok(NoiseModel::none()),
        }
    }

    /// Accumulator width: explicit `n`, or the bit length of the input sum
    /// (so the correct total never wraps), floored at one bit.
    pub fn effective_n(&self) -> usize {
        match self.n {
            Some(n) => n,
            None => {
                let sum: u128 = self.inputs.iter().map(|&t| t as u128).sum();
                ((128 - sum.leading_zeros()) as usize).max(1)
            }
        }
    }

    pub fn effective_format(&self) -> OutputFormat {
        self.format.unwrap_or(OutputFormat::Json)
    }

    fn effective_max_qubits(&self) -> usize {
        self.max_qubits.unwrap_or(DEFAULT_MAX_QUBITS)
    }

    /// Builds the adder config shared by exact/sample/compare/lemmas modes.
    fn dqa_config(&self) -> Result<DqaConfig> {
        let mut cfg = DqaConfig::new(self.inputs.clone(), self.effective_n())
            .with_noise(self.noise_model()?)
            .with_max_qubits(self.effective_max_qubits());
        if let Some(engine) = self.engine {
            cfg = cfg.with_engine(engine);
        }
        if let Some(rounds) = self.noise_rounds {
            cfg = cfg.with_noise_rounds(rounds);
        }
        if let Some(shots) = self.shots {
            cfg = cfg.with_shots(shots);
        }
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds the secret-sharing protocol config for `ntpa` mode.
    fn ntpa_config(&self) -> Result<NtpaConfig> {
        let threshold = self.threshold.ok_or_else(|| {
            CliError::Validation("ntpa mode requires 'threshold'".into())
        })?;
        let modulus = self.modulus.ok_or_else(|| {
            CliError::Validation("ntpa mode requires 'modulus' (alias 'prime')".into())
        })?;
        let mut cfg = NtpaConfig::new(self.inputs.clone(), threshold, modulus)
            .with_noise(self.noise_model()?)
            .with_max_qubits(self.effective_max_qubits());
        if let Some(engine) = self.engine {
            cfg = cfg.with_engine(engine);
        }
        if let Some(shots) = self.shots {
            cfg = cfg.with_shots(shots);
        }
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(rounds) = &self.use_rounds {
            cfg = cfg.with_use_rounds(rounds.clone());
        }
        if let Some(prune) = self.prune_below {
            cfg = cfg.with_prune_below(prune);
        }
        if let Some(limit) = self.enumeration_limit {
            cfg.enumeration_limit = limit as u128;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

// ---------------------------------------------------------------------------
// Output documents
// ---------------------------------------------------------------------------

/// Outcome rendered with its bit string (most significant bit first).
fn binary_string(x: u64, n: usize) -> String {
    format!("{x:0n$b}")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub outcome: u64,
    pub binary: String,
    pub probability: f64,
}

/// Exact or closed-form output distribution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionDoc {
    pub schema_version: u32,
    pub mode: Mode,
    pub inputs: Vec<u64>,
    pub n: usize,
    pub correct_sum: u64,
    pub correct_binary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<Engine>,
    /// Damping parameter, present for closed-form output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    pub most_likely: u64,
    pub peak_probability: f64,
    pub probabilities: Vec<f64>,
    pub rows: Vec<OutcomeRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CountRow {
    pub outcome: u64,
    pub binary: String,
    pub count: u64,
    pub frequency: f64,
}

/// Finite-shot histogram.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistogramDoc {
    pub schema_version: u32,
    pub mode: Mode,
    pub inputs: Vec<u64>,
    pub n: usize,
    pub correct_sum: u64,
    pub correct_binary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    pub engine: Engine,
    pub sampler: SamplerKind,
    pub shots: u64,
    pub seed: u64,
    pub most_frequent: u64,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub rows: Vec<CountRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareRow {
    pub outcome: u64,
    pub binary: String,
    pub count: u64,
    pub frequency: f64,
    pub model_probability: f64,
}

/// Empirical-vs-model comparison statistics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Total variation distance, in [0, 1].
    pub total_variation: f64,
    /// Pearson statistic over outcomes with positive model probability.
    pub chi_squared: f64,
    pub degrees_of_freedom: usize,
    pub rows: Vec<CompareRow>,
}

/// Comparison document: a histogram judged against a closed-form model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonDoc {
    pub schema_version: u32,
    pub mode: Mode,
    pub inputs: Vec<u64>,
    pub n: usize,
    pub correct_sum: u64,
    pub correct_binary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    pub engine: Engine,
    pub sampler: SamplerKind,
    pub shots: u64,
    pub seed: u64,
    /// Damping parameter of the model distribution.
    pub a: f64,
    pub total_variation: f64,
    pub chi_squared: f64,
    pub degrees_of_freedom: usize,
    pub rows: Vec<CompareRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaCheckDoc {
    pub name: String,
    pub comparisons: usize,
    pub max_violation: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Pass/fail report of the three structural distribution checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaDoc {
    pub schema_version: u32,
    pub mode: Mode,
    pub inputs: Vec<u64>,
    pub n: usize,
    pub correct_sum: u64,
    pub correct_binary: String,
    /// "analytic" (closed-form at a given `a`) or "simulated" (engine run).
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    pub tol: f64,
    pub checks: Vec<LemmaCheckDoc>,
    pub all_passed: bool,
    pub probabilities: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NtpaRoundDoc {
    pub round: u64,
    pub server_party: u64,
    /// Values submitted to this round's server (shares, never raw inputs).
    pub shares: Vec<u64>,
    pub share_sum: u64,
    pub outcome: u64,
    pub outcome_mod_q: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointDoc {
    pub x: u64,
    pub y: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialsDoc {
    pub shots: u64,
    pub success_rate: f64,
    /// Empirical distribution of reconstructed values over [0, q).
    pub frequencies: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExactDoc {
    /// Probability the protocol reconstructs the true total.
    pub success_probability: f64,
    /// Closed-form floor on that probability.
    pub lower_bound: f64,
    pub pruned_mass: f64,
    pub tuples_visited: u64,
    /// `probs[v]` = probability of reconstructing `v`.
    pub probs: Vec<f64>,
}

/// Secret-sharing protocol document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NtpaDoc {
    pub schema_version: u32,
    pub mode: Mode,
    pub inputs: Vec<u64>,
    pub threshold: usize,
    pub modulus: u64,
    pub n_bits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    pub engine: Engine,
    pub seed: u64,
    pub expected: u64,
    pub reconstructed: u64,
    pub correct: bool,
    pub rounds: Vec<NtpaRoundDoc>,
    pub points: Vec<PointDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<TrialsDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactDoc>,
}

// ---------------------------------------------------------------------------
// Comparison statistics
// ---------------------------------------------------------------------------

/// Judges an empirical histogram against a model distribution: total
/// variation distance plus a Pearson chi-square over the outcomes the model
/// gives positive probability (standard practice excludes zero-expectation
/// cells, where the statistic is undefined).
pub fn compare_distributions(
    empirical: &Histogram,
    model: &OutcomeDistribution,
) -> Result<ComparisonReport> {
    if empirical.n() != model.n() {
        return Err(CliError::Validation(format!(
            "histogram is over {} bits but the model is over {} bits",
            empirical.n(),
            model.n()
        )));
    }
    let n = model.n();
    let shots = empirical.shots();
    let freqs = empirical.frequencies();
    let mut chi_squared = 0.0;
    let mut classes = 0usize;
    let mut rows = Vec::with_capacity(model.probs().len());
    for (x, (&count, &p)) in empirical.counts().iter().zip(model.probs()).enumerate() {
        if p > 0.0 {
            let expected = shots as f64 * p;
            let diff = count as f64 - expected;
            chi_squared += diff * diff / expected;
            classes += 1;
        }
        rows.push(CompareRow {
            outcome: x as u64,
            binary: binary_string(x as u64, n),
            count,
            frequency: freqs[x],
            model_probability: p,
        });
    }
    let hist_dist = OutcomeDistribution::new(n, freqs)?;
    Ok(ComparisonReport {
        total_variation: hist_dist.total_variation(model),
        chi_squared,
        degrees_of_freedom: classes.saturating_sub(1),
        rows,
    })
}

// ---------------------------------------------------------------------------
// Polar export
// ---------------------------------------------------------------------------

/// Renders a distribution as polar-coordinate CSV: each outcome `x` at angle
/// `2 pi x / 2^n` with its probability as the radius.
pub fn export_polar(dist: &OutcomeDistribution) -> String {
    let mut out = String::from("outcome,binary,angle_radians,probability\n");
    for (x, (angle, prob)) in polar_coordinates(dist).into_iter().enumerate() {
        out.push_str(&format!(
            "{x},{},{angle},{prob}\n",
            binary_string(x as u64, dist.n())
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// CSV renderings of the main documents
// ---------------------------------------------------------------------------

fn distribution_csv(doc: &DistributionDoc) -> String {
    let mut out = String::from("outcome,binary,probability\n");
    for row in &doc.rows {
        out.push_str(&format!("{},{},{}\n", row.outcome, row.binary, row.probability));
    }
    out
}

fn histogram_csv(doc: &HistogramDoc) -> String {
    let mut out = String::from("outcome,binary,count,frequency\n");
    for row in &doc.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.outcome, row.binary, row.count, row.frequency
        ));
    }
    out
}

fn comparison_csv(doc: &ComparisonDoc) -> String {
    let mut out = String::from("outcome,binary,count,frequency,model_probability\n");
    for row in &doc.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.outcome, row.binary, row.count, row.frequency, row.model_probability
        ));
    }
    out
}

fn lemma_csv(doc: &LemmaDoc) -> String {
    let mut out = String::from("check,comparisons,max_violation,tol,passed\n");
    for check in &doc.checks {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            check.name, check.comparisons, check.max_violation, check.tol, check.passed
        ));
    }
    out
}

fn ntpa_csv(doc: &NtpaDoc) -> String {
    let mut out = String::from("round,server_party,share_sum,outcome,outcome_mod_q\n");
    for round in &doc.rounds {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            round.round, round.server_party, round.share_sum, round.outcome, round.outcome_mod_q
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Experiment execution
// ---------------------------------------------------------------------------

/// Everything an invocation produces, before any I/O happens.
#[derive(Clone, Debug)]
pub struct Artifacts {
    /// Rendered main document (JSON or CSV).
    pub main: String,
    /// Where to write it; `None` means stdout.
    pub main_path: Option<PathBuf>,
    /// Optional polar CSV export and its path.
    pub polar: Option<(PathBuf, String)>,
    /// One-line human summary.
    pub summary: String,
}

fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    Ok(text)
}

fn outcome_rows(dist: &OutcomeDistribution) -> Vec<OutcomeRow> {
    dist.probs()
        .iter()
        .enumerate()
        .map(|(x, &p)| OutcomeRow {
            outcome: x as u64,
            binary: binary_string(x as u64, dist.n()),
            probability: p,
        })
        .collect()
}

fn count_rows(hist: &Histogram) -> Vec<CountRow> {
    let freqs = hist.frequencies();
    hist.counts()
        .iter()
        .enumerate()
        .map(|(x, &count)| CountRow {
            outcome: x as u64,
            binary: binary_string(x as u64, hist.n()),
            count,
            frequency: freqs[x],
        })
        .collect()
}

/// Per-column damping rounds: both fan-outs of a column, or just the first.
fn rounds_per_column(rounds: NoiseRounds) -> usize {
    match rounds {
        NoiseRounds::Both => 2,
        NoiseRounds::EntangleOnly => 1,
    }
}

fn lemma_checks(
    probs: &[f64],
    correct: u64,
    tol: f64,
) -> Result<(Vec<LemmaCheckDoc>, bool)> {
    let named: [(&str, CheckReport); 3] = [
        ("reflection_symmetry", check_reflection_symmetry(probs, correct, tol)?),
        ("power_of_two_dominance", check_power_of_two_dominance(probs, correct, tol)?),
        ("proximity_ordering", check_proximity_ordering(probs, correct, tol)?),
    ];
    let mut checks = Vec::with_capacity(3);
    let mut all_passed = true;
    for (name, report) in named {
        all_passed &= report.passed();
        checks.push(LemmaCheckDoc {
            name: name.to_string(),
            comparisons: report.comparisons,
            max_violation: report.max_violation,
            tol: report.tol,
            passed: report.passed(),
        });
    }
    Ok((checks, all_passed))
}

/// The noise model to report in documents: `None` when noiseless.
fn reported_noise(noise: NoiseModel) -> Option<NoiseModel> {
    if noise.is_noiseless() {
        None
    } else {
        Some(noise)
    }
}

struct Rendered {
    main: String,
    summary: String,
    /// Distribution available for polar export, when the mode has one.
    polar_source: Option<OutcomeDistribution>,
}

fn run_exact_mode(spec: &ExperimentSpec, format: OutputFormat) -> Result<Rendered> {
    let cfg = spec.dqa_config()?;
    let dist = run_exact(&cfg)?;
    let correct = correct_sum(&cfg.inputs, cfg.n);
    let doc = DistributionDoc {
        schema_version: SCHEMA_VERSION,
        mode: Mode::Exact,
        inputs: cfg.inputs.clone(),
        n: cfg.n,
        correct_sum: correct,
        correct_binary: binary_string(correct, cfg.n),
        noise: reported_noise(cfg.noise),
        engine: Some(cfg.engine),
        a: None,
        most_likely: dist.most_likely(),
        peak_probability: dist.prob(correct),
        probabilities: dist.probs().to_vec(),
        rows: outcome_rows(&dist),
    };
    let main = match format {
        OutputFormat::Json => to_json(&doc)?,
        OutputFormat::Csv => distribution_csv(&doc),
    };
    let summary = format!(
        "exact: n={} correct={} ({}) P(correct)={:.6}",
        cfg.n,
        doc.correct_binary,
        correct,
        doc.peak_probability
    );
    Ok(Rendered { main, summary, polar_source: Some(dist) })
}

fn run_analytic_mode(spec: &ExperimentSpec, format: OutputFormat) -> Result<Rendered> {
    if spec.inputs.is_empty() {
        return Err(CliError::Validation("analytic mode requires 'inputs'".into()));
    }
    let n = spec.effective_n();
    let noise = spec.noise_model()?;
    let m = spec.inputs.len();
    let a = match spec.a {
        Some(a) => a,
        None => {
            let rounds = rounds_per_column(spec.noise_rounds.unwrap_or(NoiseRounds::Both));
            predicted_a(&noise, m + 1, rounds)
        }
    };
    let dist = analytic_distribution(&spec.inputs, n, a)?;
    let correct = correct_sum(&spec.inputs, n);
    let doc = DistributionDoc {
        schema_version: SCHEMA_VERSION,
        mode: Mode::Analytic,
        inputs: spec.inputs.clone(),
        n,
        correct_sum: correct,
        correct_binary: binary_string(correct, n),
        noise: reported_noise(noise),
        engine: None,
        a: Some(a),
        most_likely: dist.most_likely(),
        peak_probability: peak_probability(n, a),
        probabilities: dist.probs().to_vec(),
        rows: outcome_rows(&dist),
    };
    let main = match format {
        OutputFormat::Json => to_json(&doc)?,
        OutputFormat::Csv => distribution_csv(&doc),
    };
    let summary = format!(
        "analytic: n={n} a={a} correct={} P(correct)={:.6}",
        doc.correct_binary, doc.peak_probability
    );
    Ok(Rendered { main, summary, polar_source: Some(dist) })
}

fn draw_histogram(cfg: &DqaConfig, sampler: SamplerKind) -> Result<Histogram> {
    Ok(match sampler {
        SamplerKind::Distribution => sample(cfg)?,
        SamplerKind::Trajectory => sample_trajectory(cfg)?,
    })
}

fn run_sample_mode(spec: &ExperimentSpec, format: OutputFormat) -> Result<Rendered> {
    let cfg = spec.dqa_config()?;
    let sampler = spec.sampler.unwrap_or(SamplerKind::Distribution);
    let hist = draw_histogram(&cfg, sampler)?;
    let correct = correct_sum(&cfg.inputs, cfg.n);
    let freqs = hist.frequencies();
    let doc = HistogramDoc {
        schema_version: SCHEMA_VERSION,
        mode: Mode::Sample,
        inputs: cfg.inputs.clone(),
        n: cfg.n,
        correct_sum: correct,
        correct_binary: binary_string(correct, cfg.n),
        noise: reported_noise(cfg.noise),
        engine: cfg.engine,
        sampler,
        shots: cfg.shots,
        seed: cfg.seed,
        most_frequent: hist.most_frequent(),
        counts: hist.counts().to_vec(),
        frequencies: freqs.clone(),
        rows: count_rows(&hist),
    };
    let main = match format {
        OutputFormat::Json => to_json(&doc)?,
        OutputFormat::Csv => histogram_csv(&doc),
    };
    let summary = format!(
        "sample: n={} shots={} most_frequent={} ({}) freq={:.6}",
        cfg.n,
        cfg.shots,
        binary_string(doc.most_frequent, cfg.n),
        doc.most_frequent,
        freqs[doc.most_frequent as usize]
    );
    // Polar export of the empirical frequencies (they sum to one).
    let polar_source = OutcomeDistribution::new(cfg.n, freqs)?;
    Ok(Rendered { main, summary, polar_source: Some(polar_source) })
}

fn run_compare_mode(spec: &ExperimentSpec, format: OutputFormat) -> Result<Rendered> {
    let cfg = spec.dqa_config()?;
    let sampler = spec.sampler.unwrap_or(SamplerKind::Distribution);
    let hist = draw_histogram(&cfg, sampler)?;
    let a = match spec.a {
        Some(a) => a,
        None => fit_fidelity_param(&cfg)?,
    };
    let model = analytic_distribution(&cfg.inputs, cfg.n, a)?;
    let report = compare_distributions(&hist, &model)?;
    let correct = correct_sum(&cfg.inputs, cfg.n);
    let doc = ComparisonDoc {
        schema_version: SCHEMA_VERSION,
        mode: Mode::Compare,
        inputs: cfg.inputs.clone(),
        n: cfg.n,
        correct_sum: correct,
        correct_binary: binary_string(correct, cfg.n),
        noise: reported_noise(cfg.noise),
        engine: cfg.engine,
        sampler,
        shots: cfg.shots,
        seed: cfg.seed,
        a,
        total_variation: report.total_variation,
        chi_squared: report.chi_squared,
        degrees_of_freedom: report.degrees_of_freedom,
        rows: report.rows,
    };
    let main = match format {
        OutputFormat::Json => to_json(&doc)?,
        OutputFormat::Csv => comparison_csv(&doc),
    };
    let summary = format!(
        "compare: n={} shots={} a={:.6} TV={:.6} chi2={:.4} dof={}",
        cfg.n, cfg.shots, a, doc.total_variation, doc.chi_squared, doc.degrees_of_freedom
    );
    Ok(Rendered { main, summary, polar_source: Some(model) })
}

fn run_lemmas_mode(spec: &ExperimentSpec, format: OutputFormat) -> Result<Rendered> {
    if spec.inputs.is_empty() {
        return Err(CliError::Validation("lemmas mode requires 'inputs'".into()));
    }
    let n = spec.effective_n();
    let correct = correct_sum(&spec.inputs, n);
    // Check either the closed form at a pinned `a`, or an engine run.
    let (dist, source, a, noise, default_tol) = match spec.a {
        Some(a) => {
            let dist = analytic_distribution(&spec.inputs, n, a)?;
            (dist, "analytic", Some(a), NoiseModel::none(), tol::CLOSED_FORM)
        }
        None => {
            let cfg = spec.dqa_config()?;
            let dist = run_exact(&cfg)?;
            (dist, "simulated", None, cfg.noise, tol::ENGINE_MATCH)
        }
    };
    let tolerance = spec.tol.unwrap_or(default_tol);
    let (checks, all_passed) = lemma_checks(dist.probs(), correct, tolerance)?;
    let doc = LemmaDoc {
        schema_version: SCHEMA_VERSION,
        mode: Mode::Lemmas,
        inputs: spec.inputs.clone(),
        n,
        correct_sum: correct,
        correct_binary: binary_string(correct, n),
        source: source.to_string(),
        a,
        noise: reported_noise(noise),
        tol: tolerance,
        checks,
        all_passed,
        probabilities: dist.probs().to_vec(),
    };
    let main = match format {
        OutputFormat::Json => to_json(&doc)?,
        OutputFormat::Csv => lemma_csv(&doc),
    };
    let summary = format!(
        "lemmas: n={n} source={source} tol={tolerance} all_passed={all_passed}"
    );
    Ok(Rendered { main, summary, polar_source: Some(dist) })
}

fn run_ntpa_mode(spec: &ExperimentSpec, format: OutputFormat) -> Result<Rendered> {
    let cfg = spec.ntpa_config()?;
    let run = run_ntpa(&cfg)?;
    let rounds = run
        .rounds
        .iter()
        .map(|r| NtpaRoundDoc {
            round: r.round,
            server_party: r.server_party,
            shares: r.shares.clone(),
            share_sum: r.share_sum,
            outcome: r.outcome,
            outcome_mod_q: r.outcome % cfg.modulus,
        })
        .collect();
    let points = run.points.iter().map(|s| PointDoc { x: s.x, y: s.y }).collect();
    let trials = if cfg.shots > 0 {
        let sample = run_ntpa_trials(&cfg)?;
        Some(TrialsDoc {
            shots: cfg.shots,
            success_rate: sample.success_rate,
            frequencies: sample.frequencies,
        })
    } else {
        None
    };
    let exact = if spec.exact.unwrap_or(false) {
        let dist = reconstruction_distribution(&cfg)?;
        Some(ExactDoc {
            success_probability: dist.success_probability(),
            lower_bound: success_lower_bound(&cfg)?,
            pruned_mass: dist.pruned_mass,
            tuples_visited: dist.tuples_visited.min(u64::MAX as u128) as u64,
            probs: dist.probs,
        })
    } else {
        None
    };
    let doc = NtpaDoc {
        schema_version: SCHEMA_VERSION,
        mode: Mode::Ntpa,
        inputs: cfg.inputs.clone(),
        threshold: cfg.threshold,
        modulus: cfg.modulus,
        n_bits: run.n_bits,
        noise: reported_noise(cfg.noise),
        engine: cfg.engine,
        seed: cfg.seed,
        expected: run.expected,
        reconstructed: run.reconstructed,
        correct: run.is_correct(),
        rounds,
        points,
        trials,
        exact,
    };
    let mut summary = format!(
        "ntpa: m={} t={} q={} reconstructed={} expected={} correct={}",
        cfg.m(),
        cfg.threshold,
        cfg.modulus,
        run.reconstructed,
        run.expected,
        run.is_correct()
    );
    if let Some(t) = &doc.trials {
        summary.push_str(&format!(" success_rate={:.4}", t.success_rate));
    }
    if let Some(e) = &doc.exact {
        summary.push_str(&format!(" exact_success={:.6}", e.success_probability));
    }
    let main = match format {
        OutputFormat::Json => to_json(&doc)?,
        OutputFormat::Csv => ntpa_csv(&doc),
    };
    Ok(Rendered { main, summary, polar_source: None })
}

/// Runs one experiment and renders its artifacts; does no I/O.
pub fn run_experiment(mode: Mode, spec: &ExperimentSpec) -> Result<Artifacts> {
    if let Some(config_mode) = spec.mode {
        if config_mode != mode {
            return Err(CliError::Validation(format!(
                "config says mode '{config_mode}' but the command line says '{mode}'"
            )));
        }
    }
    let format = spec.effective_format();
    let rendered = match mode {
        Mode::Exact => run_exact_mode(spec, format)?,
        Mode::Sample => run_sample_mode(spec, format)?,
        Mode::Analytic => run_analytic_mode(spec, format)?,
        Mode::Compare => run_compare_mode(spec, format)?,
        Mode::Lemmas => run_lemmas_mode(spec, format)?,
        Mode::Ntpa => run_ntpa_mode(spec, format)?,
    };
    let polar = if spec.polar.unwrap_or(false) {
        let dist = rendered.polar_source.as_ref().ok_or_else(|| {
            CliError::Validation(format!("mode '{mode}' has no distribution to export as polar"))
        })?;
        let out = spec.out.as_ref().ok_or_else(|| {
            CliError::Validation("polar export requires an output path ('out')".into())
        })?;
        Some((out.with_extension("polar.csv"), export_polar(dist)))
    } else {
        None
    };
    Ok(Artifacts {
        main: rendered.main,
        main_path: spec.out.clone(),
        polar,
        summary: rendered.summary,
    })
}

/// Writes the artifacts that have file paths.
pub fn write_artifacts(artifacts: &Artifacts) -> Result<()> {
    if let Some(path) = &artifacts.main_path {
        std::fs::write(path, &artifacts.main)?;
    }
    if let Some((path, content)) = &artifacts.polar {
        std::fs::write(path, content)?;
    }
    Ok(())
}

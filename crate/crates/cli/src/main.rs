//! `dqa <mode> --config <path> [--out <path>] [--format json|csv] [--seed N]`
//!
//! Runs one experiment per invocation. The `DQA_MAX_QUBITS` environment
//! variable overrides the simulated-qubit ceiling. Exit codes: 0 success,
//! 1 I/O failure, 2 validation error, 3 capacity limit.

use std::path::PathBuf;

use clap::Parser;
use dqa_cli::{run_experiment, write_artifacts, CliError, ExperimentSpec, Mode, OutputFormat};

#[derive(Parser)]
#[command(
    name = "dqa",
    version,
    about = "Distributed adder simulator: run experiments described by a JSON config"
)]
struct Cli {
    /// Experiment mode: exact | sample | analytic | compare | ntpa | lemmas
    mode: String,
    /// Path to the JSON experiment config
    #[arg(long)]
    config: PathBuf,
    /// Write the main document here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Main document format: json | csv
    #[arg(long)]
    format: Option<String>,
    /// Override the config's RNG seed
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mode: Mode = cli.mode.parse()?;
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", cli.config.display())))?;
    let mut spec = ExperimentSpec::from_json(&text)?;
    if let Some(out) = cli.out {
        spec.out = Some(out);
    }
    if let Some(format) = cli.format {
        spec.format = Some(format.parse::<OutputFormat>()?);
    }
    if let Some(seed) = cli.seed {
        spec.seed = Some(seed);
    }
    if let Ok(value) = std::env::var("DQA_MAX_QUBITS") {
        let limit: usize = value.trim().parse().map_err(|_| {
            CliError::Validation(format!(
                "DQA_MAX_QUBITS must be a positive integer, got '{value}'"
            ))
        })?;
        spec.max_qubits = Some(limit);
    }
    let artifacts = run_experiment(mode, &spec)?;
    write_artifacts(&artifacts)?;
    if artifacts.main_path.is_some() {
        // Files carry the data; stdout gets the one-line summary.
        println!("{}", artifacts.summary);
    } else {
        print!("{}", artifacts.main);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

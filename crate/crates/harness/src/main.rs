use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use occam_harness::{run, Experiment, ExperimentConfig, HarnessError};

/// Seeded Bayesian model-selection experiments. Writes report.json and CSV tables.
#[derive(Parser, Debug)]
#[command(name = "occam-icl", version)]
struct Cli {
    experiment: Experiment,
    /// JSON document with `seed`, `trials` and `params`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Defaults to `out/<experiment>`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override one params field, e.g. `--set lens=[300,1000]` or `--set client.model_name=gpt-4o`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Print the resolved config and exit.
    #[arg(long)]
    dry_run: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Config(format!("threads: {e}")))?;
    }
    let document = cli.config.as_ref().map(std::fs::read_to_string).transpose()?;
    let cfg = ExperimentConfig::resolve(cli.experiment, document.as_deref(), cli.seed, cli.trials, &cli.overrides)?;
    if cli.dry_run {
        return emit(&[serde_json::to_string_pretty(&cfg.to_json())?]);
    }
    let report = run(&cfg)?;
    let dir = cli
        .out_dir
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.name()));
    for path in report.write(&dir)? {
        eprintln!("wrote {}", path.display());
    }
    let lines: Vec<String> = report
        .aggregates
        .iter()
        .map(|(k, v)| format!("{k} = {}", occam_core::numerics::format_sig(*v, 12)))
        .collect();
    emit(&lines)
}

/// Writes lines to stdout; a closed pipe just stops the output.
fn emit(lines: &[String]) -> Result<(), HarnessError> {
    let mut out = std::io::stdout().lock();
    for line in lines {
        match writeln!(out, "{line}") {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => break,
            r => r?,
        }
    }
    Ok(())
}

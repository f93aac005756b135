use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kcut_cli::{load_config, run_experiment, CliError, Experiment};

/// Simulate the k-cut model and its continuum limit.
#[derive(Parser)]
#[command(name = "kcut", version)]
struct Args {
    experiment: Experiment,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output root (results go to <out>/<experiment>/<label>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    label: Option<String>,
}

fn run(args: Args) -> Result<(), CliError> {
    let mut config = load_config(&args.config)?;
    config.experiment = args.experiment;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(workers) = args.workers {
        config.workers = workers;
    }
    if let Some(out) = args.out {
        config.output = out;
    }
    if let Some(label) = args.label {
        config.label = label;
    }
    let result = run_experiment(&config)?;
    println!(
        "{} finished in {:.1}s -> {}",
        config.experiment.name(),
        result.runtime_seconds,
        result.directory.display()
    );
    for g in &result.summary.gof {
        println!(
            "  {}: statistic {:.4}, p {:.4}",
            g.label, g.result.statistic, g.result.p_value
        );
    }
    for s in &result.summary.skipped {
        println!("  skipped n = {}: {}", s.n, s.reason);
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Config { .. }) => {
            eprintln!("kcut: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("kcut: {e}");
            ExitCode::FAILURE
        }
    }
}

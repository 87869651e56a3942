use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use regcca::cli::{exit_code, run, Command};

#[derive(Parser)]
#[command(name = "regcca", version, about = "Regularised CCA: fit, sweep, compare, biplot, synthetic benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit each configured estimator at its penalty.
    Fit(RunArgs),
    /// Penalty-grid × fold sweep with CV metrics.
    Sweep(RunArgs),
    /// Trajectory distance matrix and registered overlap matrices.
    Compare(RunArgs),
    /// Structure-correlation biplot coordinates.
    Biplot(RunArgs),
    /// Run a named synthetic experiment.
    SynthBench(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (defaults to the available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Fit(a) => (Command::Fit, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::Compare(a) => (Command::Compare, a),
        Cmd::Biplot(a) => (Command::Biplot, a),
        Cmd::SynthBench(a) => (Command::SynthBench, a),
    };
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(command, &args.config, &args.out, args.seed) {
        Ok(summary) => {
            let warnings = &summary.manifest.warnings;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            if !warnings.is_empty() {
                eprintln!("{} warning(s)", warnings.len());
            }
            println!("{}", summary.manifest_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

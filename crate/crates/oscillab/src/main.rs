use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;
use oscillab::{run_experiment, Command, RunOptions};

/// Frequencies of noisy limit-cycle oscillators.
#[derive(Parser, Debug)]
#[command(name = "oscillab", version)]
struct Cli {
    /// simulate, find-cycle, phase-lift, estimate-measure, frequency, sweep,
    /// decompose, check-conditions or fp-oracle
    command: Command,
    /// TOML experiment configuration
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory (overrides `[output] dir`)
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism
    #[arg(long, env = "OSCILLAB_THREADS")]
    threads: Option<usize>,
    /// Master seed (overrides `[integrator] seed`)
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            error!("{}: {e}", cli.config.display());
            return ExitCode::from(1);
        }
    };
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let outcome = run_experiment(cli.command, &text, &RunOptions { out_dir: cli.out, threads, seed: cli.seed });
    if let Some(e) = &outcome.error {
        error!("{e}");
    }
    if let Some(dir) = &outcome.out_dir {
        log::info!("artifacts in {}", dir.display());
    }
    ExitCode::from(outcome.exit_code as u8)
}

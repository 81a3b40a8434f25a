use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use elasto_collocation::experiments::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "elasto", version, about = "LGL collocation experiments for linear elastodynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (overrides `workers`).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Base random seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// LGL rule checks for N = 2..64 and norm-equivalence ratios.
    Quad,
    /// Energy traces of the semi-discrete evolution.
    Energy,
    /// Boundary observation ratios, multiplier diagnostics, worst case.
    Observe,
    /// HUM boundary control synthesis.
    Control,
}

fn run(cli: &Cli) -> elasto_collocation::Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    match cli.command {
        Command::Quad => experiments::cmd_quad(&cfg),
        Command::Energy => experiments::cmd_energy(&cfg),
        Command::Observe => experiments::cmd_observe(&cfg),
        Command::Control => experiments::cmd_control(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

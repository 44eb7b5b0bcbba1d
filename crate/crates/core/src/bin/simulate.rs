use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use wsn_sim::engine::ProtocolKind;
use wsn_sim::{parse_config, run_experiment, ExperimentSpec, SimError};

/// Clustered wireless-sensor-network routing simulator.
#[derive(Parser)]
#[command(name = "simulate", version, about)]
struct Cli {
    /// Configuration file (flat `section.key = value` lines). Defaults
    /// apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Protocol(s) to run, overriding the config (repeatable).
    #[arg(long = "protocol")]
    protocols: Vec<String>,

    /// Seed(s) to run, overriding the config (repeatable).
    #[arg(long = "seed")]
    seeds: Vec<u64>,

    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the simulator version.
    Version,
}

fn execute(cli: Cli) -> Result<(), SimError> {
    let mut spec = match &cli.config {
        Some(path) => parse_config(path)?,
        None => ExperimentSpec::default(),
    };
    if !cli.protocols.is_empty() {
        spec.protocols = cli
            .protocols
            .iter()
            .map(|p| ProtocolKind::from_str(p))
            .collect::<Result<Vec<_>, _>>()?;
    }
    if !cli.seeds.is_empty() {
        spec.seeds = cli.seeds.clone();
    }
    if let Some(out) = &cli.out {
        spec.out_dir = out.clone();
    }

    let output = run_experiment(&spec)?;
    println!(
        "completed {} runs ({} protocols x {} seeds)",
        output.runs.len(),
        spec.protocols.len(),
        spec.seeds.len()
    );
    for file in &output.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(Command::Version) = cli.command {
        println!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
        return ExitCode::SUCCESS;
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                SimError::Config(_) => ExitCode::from(2),
                SimError::Io(_) => ExitCode::from(3),
            }
        }
    }
}

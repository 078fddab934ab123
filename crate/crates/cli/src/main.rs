mod commands;
mod config;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{output_dir, Outcome, Run};
use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "ptbloch",
    version,
    about = "Spectral experiments for periodic Schrödinger operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan the discriminant over a grid of energies
    Discriminant(Common),
    /// Classify resonances and trace the spectrum near each of them
    Resonance(Common),
    /// Trace divisor trajectories and compare them with the first-order ellipse
    Divisor(Common),
    /// Integrate the Dubrovin flow on a hyperelliptic curve
    Dubrovin(Common),
    /// Trace the spectral locus through a start point
    Locus(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
    /// Integrator tolerance; overrides `tolerances.integrator`
    #[arg(long)]
    tol: Option<f64>,
}

fn run(command: &Command) -> Result<Outcome, CliError> {
    let (Command::Discriminant(common)
    | Command::Resonance(common)
    | Command::Divisor(common)
    | Command::Dubrovin(common)
    | Command::Locus(common)) = command;

    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(tol) = common.tol {
        config.tolerances.integrator = tol;
    }
    let out_dir = output_dir(common.out.as_deref(), &config);
    config.output_dir = Some(out_dir.clone());
    config.validate()?;
    let run = Run { config, out_dir };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs.map_or(0, usize::from))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {:?} workers: {e}", common.jobs)))?;
    pool.install(|| match command {
        Command::Discriminant(_) => commands::discriminant(&run),
        Command::Resonance(_) => commands::resonance(&run),
        Command::Divisor(_) => commands::divisor(&run),
        Command::Dubrovin(_) => commands::dubrovin(&run),
        Command::Locus(_) => commands::locus(&run),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for path in &outcome.written {
                println!("{}", path.display());
            }
            if outcome.partial_failure {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

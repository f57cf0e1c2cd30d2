//! `lipext`: validate instances, compute extensions, run the verification
//! battery and the energy checks. JSON in, JSON out.
//!
//! Exit codes: 0 success, 1 input or parameter error, 2 failed property check.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "lipext", version, about = "Lipschitz extensions on finite metric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Input {
    /// Instance file (JSON)
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an instance file
    Validate(Input),
    /// Evaluate the extension on query points
    Extend(ExtendArgs),
    /// Run the full check battery
    Verify(VerifyArgs),
    /// Energies on X and on C
    Energy(EnergyArgs),
    /// McShane versus the constant-preserving extension on a grid of [0, 1]
    DemoCounterexample(DemoArgs),
}

#[derive(Debug, Args)]
pub struct ExtendArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long)]
    epsilon: f64,
    /// Comma-separated indices or `all`; defaults to the points outside C
    #[arg(long)]
    queries: Option<String>,
    /// Scale that `eps_0` is anchored to; defaults to the diameter
    #[arg(long)]
    anchor: Option<f64>,
    /// Clamp the result to [-B, B]
    #[arg(long)]
    bounded: Option<f64>,
    /// Multiply by a cutoff so the result vanishes far from C
    #[arg(long)]
    cutoff: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    xi: f64,
    /// Comma-separated radii for the locality checks
    #[arg(long)]
    rbar: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    anchor: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long)]
    p: f64,
    /// Comma-separated radii
    #[arg(long)]
    radii: String,
    #[arg(long, default_value_t = 0.1)]
    xi: f64,
    /// Defaults to L
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 1001)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    xi: f64,
    #[arg(long, default_value_t = 0.5)]
    rbar: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("LIPEXT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::param("LIPEXT_THREADS", format!("expected a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::input("threads", e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Validate(a) => commands::validate(&a.input),
        Command::Extend(a) => commands::extend(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Energy(a) => commands::energy(&a),
        Command::DemoCounterexample(a) => commands::demo(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.code == 1 => {
            println!("{}", e.to_json());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code)
        }
    }
}

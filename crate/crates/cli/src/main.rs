use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::{Command, CommonArgs, RunConfig};

/// Verification suites and solvers for the projectively invariant energy on flat tori.
#[derive(Parser, Debug)]
#[command(name = "projlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Run the identity suite and write report.json.
    Verify(CommonArgs),
    /// Solve for the conformally critical metric on a surface.
    Solve2d(CommonArgs),
    /// Conformal steepest descent of the energy (n >= 3).
    Flow(CommonArgs),
    /// Check the cubic-differential criticality mechanism on a 2-torus.
    Blaschke(CommonArgs),
    /// Estimate the bottom of the projective-conformal Laplacian spectrum (n >= 3).
    Spectrum(CommonArgs),
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration; exit code 2.
    Usage(String),
    /// A computation failed; exit code 1.
    Failure(String),
}

impl From<projlab_core::Error> for CliError {
    fn from(e: projlab_core::Error) -> Self {
        use projlab_core::Error::*;
        match e {
            InvalidGrid(_) | BandLimitTooLarge { .. } | InvalidAmplitude(_) | InvalidArgument(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Failure(e.to_string()),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("PROJLAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("PROJLAB_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Failure(format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    let (command, args) = match cli.command {
        Sub::Verify(a) => (Command::Verify, a),
        Sub::Solve2d(a) => (Command::Solve2d, a),
        Sub::Flow(a) => (Command::Flow, a),
        Sub::Blaschke(a) => (Command::Blaschke, a),
        Sub::Spectrum(a) => (Command::Spectrum, a),
    };
    let cfg = RunConfig::resolve(command, &args)?;
    let report = commands::run(&cfg)?;
    for c in &report.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {:<48} {:>10.3e} (tol {:.0e})", c.check_id, c.max_error, c.tolerance);
    }
    for (k, v) in &report.info {
        println!("{k}: {v}");
    }
    let passed = report.checks.iter().filter(|c| c.pass).count();
    println!(
        "{}: {passed}/{} checks passed; report written to {}",
        cfg.command.name(),
        report.checks.len(),
        cfg.out.join("report.json").display()
    );
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(msg)) => {
            eprintln!("projlab: usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("projlab: error: {msg}");
            ExitCode::from(1)
        }
    }
}

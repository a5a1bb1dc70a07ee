use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dsmf_cli::{cmd_certify, cmd_run, cmd_verify, load_scenario, CmdError};
use dsmf_core::Scenario;

/// Distributed set-membership filtering: simulate, certify and verify sensor networks.
#[derive(Parser)]
#[command(name = "dsmf", version)]
struct Cli {
    /// Relative rank tolerance (overrides the scenario file).
    #[arg(long, global = true)]
    tol_rank: Option<f64>,
    /// Unit-circle tolerance on eigenvalue moduli (overrides the scenario file).
    #[arg(long, global = true)]
    tol_eig: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the scenario, run the filter and write CSV/JSON/SVG artifacts.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the boundedness certificate as JSON; exit 1 unless every component is certified.
    Certify { scenario: PathBuf },
    /// Check the outer bounds on unreduced beliefs; exit 1 on any violation.
    Verify {
        scenario: PathBuf,
        #[arg(long, default_value_t = 6)]
        kmax: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Corrupt the checks on purpose; the run is then expected to fail.
        #[arg(long)]
        inject_fault: bool,
    },
}

fn load(cli: &Cli, path: &Path) -> Result<Scenario, CmdError> {
    let mut s = load_scenario(path)?;
    if let Some(r) = cli.tol_rank {
        s.tolerances.rank = r;
    }
    if let Some(e) = cli.tol_eig {
        s.tolerances.eig = e;
    }
    Ok(s)
}

/// Prints JSON to stdout; a closed pipe is not an error worth reporting.
fn emit<T: serde::Serialize>(value: &T) {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn run(cli: &Cli) -> Result<u8, CmdError> {
    match &cli.command {
        Command::Run { scenario, out } => {
            let s = load(cli, scenario)?;
            let summary = cmd_run(&s, out)?;
            emit(&summary);
            Ok(0)
        }
        Command::Certify { scenario } => {
            let s = load(cli, scenario)?;
            let report = cmd_certify(&s)?;
            emit(&report);
            Ok(if report.passes() { 0 } else { 1 })
        }
        Command::Verify {
            scenario,
            kmax,
            samples,
            inject_fault,
        } => {
            let s = load(cli, scenario)?;
            let summary = cmd_verify(&s, *kmax, *samples, *inject_fault)?;
            emit(&summary);
            Ok(if summary.violations() == 0 { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            if let CmdError::Runtime(dsmf_core::DsmfError::GrowthCap { .. }) = e {
                eprintln!("error: {e}\nadvisory: lower --kmax; the unreduced sets grow with every step");
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

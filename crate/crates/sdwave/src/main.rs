use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdwave::config::Setup;
use sdwave::error::CliError;
use sdwave::run::{self, RunOptions};
use sdwave::verify;

#[derive(Parser)]
#[command(name = "sdwave", version, about = "Spectral Galerkin simulator for strongly damped wave equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (SDWAVE_OUT takes precedence).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for ensemble members.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate and write the trajectory diagnostics.
    Simulate(RunArgs),
    /// Identity residuals, norm equivalence and modified energy.
    Diagnose(RunArgs),
    /// Linear/nonlinear splitting, decay fit and w regularity.
    Decompose(RunArgs),
    /// FitzHugh-Nagumo versus its reduced wave equation.
    Fhn(RunArgs),
    /// Absorbing-set envelope and attractor sample.
    Attractor(RunArgs),
    /// Run acceptance checks: identities, convergence, dissipativity,
    /// decomposition, fhn or all.
    Verify { suite: String },
}

type Handler = fn(&Setup, &RunOptions) -> Result<String, CliError>;

fn execute(cmd: Command) -> Result<bool, CliError> {
    let (f, args): (Handler, RunArgs) = match cmd {
        Command::Simulate(a) => (run::simulate_cmd, a),
        Command::Diagnose(a) => (run::diagnose_cmd, a),
        Command::Decompose(a) => (run::decompose_cmd, a),
        Command::Fhn(a) => (run::fhn_cmd, a),
        Command::Attractor(a) => (run::attractor_cmd, a),
        Command::Verify { suite } => {
            let ids = verify::suite(&suite).ok_or_else(|| {
                let known: Vec<&str> = verify::SUITES.iter().map(|(n, _)| *n).collect();
                CliError::Usage(format!("unknown suite `{suite}` (expected one of: {})", known.join(", ")))
            })?;
            let mut all = true;
            for id in ids {
                let r = verify::run_criterion(*id);
                println!("{}", r.line());
                all &= r.passed;
            }
            return Ok(all);
        }
    };
    let setup = Setup::load(&args.config)?;
    let opts = RunOptions { out: args.out, threads: args.threads };
    println!("{}", f(&setup, &opts)?);
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

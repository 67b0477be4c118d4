use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nsel_core::ledger::{self, Tolerances};

#[derive(Parser)]
#[command(name = "nsel", version, about = "Coarse-grained energy ledgers for periodic Navier-Stokes runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configured flow and store its snapshots.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Per-width balances and dissipation estimators.
    Analyze { run_dir: PathBuf },
    /// Solve the constrained minimization at every width.
    Minimize {
        run_dir: PathBuf,
        /// Cross-check the closed form against the iterative solver.
        #[arg(long)]
        oracle: bool,
    },
    /// Join stage outputs into summaries and plot data.
    Report { run_dir: PathBuf },
    /// Run the built-in acceptance pipeline.
    Verify {
        /// Tolerance overrides in TOML.
        #[arg(long)]
        tolerances: Option<PathBuf>,
        /// Working directory; a temporary one is used when omitted.
        #[arg(long)]
        work_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> nsel_core::Result<bool> {
    match cli.command {
        Command::Simulate { config } => {
            let dir = ledger::cmd_simulate_file(&config)?;
            println!("{}", dir.display());
        }
        Command::Analyze { run_dir } => {
            let table = ledger::cmd_analyze(&run_dir)?;
            println!("{} widths analysed", table.rows.len());
        }
        Command::Minimize { run_dir, oracle } => {
            let rec = ledger::cmd_minimize(&run_dir, oracle)?;
            if rec.oracle.iter().flatten().any(|o| !o.converged) {
                eprintln!("warning: oracle did not converge at every width");
            }
            println!("{} widths minimized", rec.widths.len());
        }
        Command::Report { run_dir } => {
            ledger::cmd_report(&run_dir)?;
            print!("{}", std::fs::read_to_string(run_dir.join(ledger::pipeline::SUMMARY_TABLE))?);
        }
        Command::Verify { tolerances, work_dir } => {
            let tol = match tolerances {
                Some(p) => Tolerances::load(&p)?,
                None => Tolerances::default(),
            };
            let tmp;
            let work = match work_dir {
                Some(w) => w,
                None => {
                    tmp = std::env::temp_dir().join(format!("nsel-verify-{}", std::process::id()));
                    tmp
                }
            };
            let results = ledger::cmd_verify(&work, &tol, &mut std::io::stdout())?;
            let failed: Vec<_> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
            if failed.is_empty() {
                println!("all criteria passed");
            } else {
                println!("failed: {}", failed.join(", "));
            }
            return Ok(failed.is_empty());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

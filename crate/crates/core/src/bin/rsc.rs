//! `rsc`: experiment runner for redundant subspace correction.
//!
//! Exit codes: 0 success, 2 non-convergence or failed oracle check,
//! 1 configuration or input error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use resilient_schwarz::analysis::oracle_suite;
use resilient_schwarz::experiment::{compare_runs, run_experiment, ExperimentConfig, Summary};

#[derive(Parser)]
#[command(name = "rsc", version, about = "Redundant Schwarz subspace correction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a key/value config file.
    Run {
        config: PathBuf,
        /// Override the output directory from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Compare two `summary.json` files; prints a JSON comparison.
    Compare { a: PathBuf, b: PathBuf },
    /// Run the dense oracle suite on a random corpus.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        cases: usize,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> resilient_schwarz::Result<ExitCode> {
    match cmd {
        Command::Run { config, output_dir } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = Some(dir);
            }
            let outcome = run_experiment(&cfg)?;
            let s = &outcome.summary;
            println!(
                "converged={} iterations={} final_relres={:e} messages={} local_solves={}",
                s.converged, s.iterations, s.final_relres, s.messages, s.local_solves
            );
            if let Some(d) = &s.diagnostic {
                println!("diagnostic: {d}");
            }
            if let Some(dir) = &cfg.output_dir {
                println!("wrote {}/history.csv and {}/summary.json", dir.display(), dir.display());
            }
            Ok(if s.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Compare { a, b } => {
            let cmp = compare_runs(&Summary::from_file(a)?, &Summary::from_file(b)?)?;
            println!("{}", serde_json::to_string_pretty(&cmp)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { seed, cases } => {
            let checks = oracle_suite(seed, cases)?;
            let mut ok = true;
            for c in &checks {
                println!(
                    "{} {:<28} cases={:<4} worst={:.3e} tol={:.1e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.cases,
                    c.worst,
                    c.tolerance
                );
                ok &= c.passed;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}

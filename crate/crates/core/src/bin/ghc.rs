use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use graph_heat_control::scenario::{emit_report, run_scenario, Scenario};

#[derive(Parser)]
#[command(name = "ghc", version, about = "Heat control experiments on weighted graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write summary.json plus CSV detail.
    Run {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, env = "GHC_OUT_DIR", default_value = "ghc-out")]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        verbose: bool,
    },
}

fn main() -> ExitCode {
    let Command::Run {
        scenario,
        out,
        seed,
        verbose,
    } = Cli::parse().command;

    let outcome = Scenario::load(&scenario).and_then(|s| run_scenario(&s, seed, verbose));
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match emit_report(&outcome, &out) {
        Ok(files) if verbose => {
            for f in files {
                eprintln!("wrote {}", f.display());
            }
        }
        Ok(_) => {}
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let failed: Vec<_> = outcome.summary.failed_assertions().map(|a| a.name.as_str()).collect();
    if failed.is_empty() {
        println!("{}: passed", outcome.summary.scenario);
        ExitCode::SUCCESS
    } else {
        println!("{}: FAILED {}", outcome.summary.scenario, failed.join(", "));
        ExitCode::FAILURE
    }
}

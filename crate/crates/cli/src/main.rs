//! `lqt`: simulate, linearize, estimate, diagnose and benchmark.
//!
//! Every file written carries a provenance block (tool version, seed and a
//! SHA-256 digest of the configuration and input files). Failures print a
//! JSON object `{"error": {"kind", "message"}}` on stderr and exit nonzero.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use args::{Cli, Command};
use output::{CliError, CliResult};

fn run(cli: &Cli) -> CliResult<serde_json::Value> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot start {} workers: {e}", cli.jobs)))?;
    }
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Linearize(a) => commands::linearize(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Bench(a) => commands::run_bench(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let msg = e.render().to_string();
            eprintln!("{}", json!({ "error": { "kind": "usage", "message": msg.trim() } }));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}

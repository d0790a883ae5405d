//! `catscope` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or invalid parameters, 2 I/O, 3 schema or
//! data errors (unmapped fields, malformed rows, empty split groups),
//! 4 numerical failures.

mod args;
mod commands;
mod output;
#[cfg(test)]
mod tests;

use std::process::ExitCode;

use catscope::Error;
use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

const THREADS_VAR: &str = "CATSCOPE_THREADS";

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Precondition(_) => 1,
        Error::Io { .. } => 2,
        Error::Csv(err) if matches!(err.kind(), csv::ErrorKind::Io(_)) => 2,
        Error::Csv(_) | Error::Schema(_) | Error::Row { .. } | Error::EmptyGroup { .. } => 3,
        Error::Convergence { .. } | Error::DegenerateMass { .. } | Error::Degenerate(_) => 4,
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_VAR} must be a non-negative integer, got `{raw}`"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| format!("cannot configure thread pool: {e}"))?;
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> catscope::Result<()> {
    match &cli.command {
        Command::IngestCheck(a) => commands::ingest::run(a),
        Command::Mca(a) => commands::mca::run(a),
        Command::Ttest(a) => commands::ttest::run(a),
        Command::Forecast(a) => commands::forecast::run(a),
        Command::Synth(a) => commands::synth::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

//! `onfdr` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 malformed CSV input, 3 invalid
//! configuration or protocol violation. Data goes to stdout, diagnostics to stderr.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<onfdr::Error>() {
        Some(onfdr::Error::Csv { .. }) => 2,
        Some(onfdr::Error::Io(_)) => 1,
        Some(_) => 3,
        None => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

//! `qsense` command-line front end: unit-aware configuration, figure
//! datasets as CSV, and a self-check table.

pub mod check;
pub mod commands;
pub mod config;
pub mod units;

use std::ffi::OsString;

use clap::Parser;

pub use config::{Cli, Command, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(qsense_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::ChecksFailed(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<qsense_core::Error> for CliError {
    fn from(e: qsense_core::Error) -> Self {
        match e {
            qsense_core::Error::Io(msg) => CliError::Io(msg),
            other => CliError::Numeric(other),
        }
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = config::parse_config(cli).and_then(|cfg| {
        if cfg.check {
            check::run_checks(&mut std::io::stdout())
        } else {
            commands::run(&cfg).map(|paths| {
                for p in paths {
                    println!("{}", p.display());
                }
            })
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qsense: {e}");
            e.exit_code()
        }
    }
}

mod args;
mod commands;
mod config;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Process exit codes.
pub const EXIT_IO: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn parse(message: impl Into<String>) -> Self {
        CliError { code: EXIT_PARSE, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { code: EXIT_IO, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<cdsboost::Error> for CliError {
    fn from(e: cdsboost::Error) -> Self {
        use cdsboost::error::ErrorKind;
        let code = match (&e, e.kind()) {
            (cdsboost::Error::Io(_), _) => EXIT_IO,
            (_, ErrorKind::Parse) => EXIT_PARSE,
            (_, ErrorKind::Validation) => EXIT_VALIDATION,
            (_, ErrorKind::Numeric) => EXIT_NUMERIC,
        };
        CliError { code, message: e.to_string() }
    }
}

fn run() -> Result<(), CliError> {
    let argv = config::expand(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return Err(CliError {
                code: if e.use_stderr() { EXIT_PARSE } else { 0 },
                message: String::new(),
            });
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::validation("--workers must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::io(format!("cannot start worker pool: {e}")))?;
    let parallel = pool.current_num_threads() > 1;
    pool.install(|| match cli.command {
        Command::Fit(a) => commands::fit(a, parallel),
        Command::Simulate(a) => commands::simulate(a),
        Command::Benchmark(a) => commands::benchmark(a, parallel),
        Command::Stability(a) => commands::stability(a, parallel),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.message.is_empty() {
                eprintln!("error: {}", e.message);
            }
            ExitCode::from(e.code)
        }
    }
}

//! `qwalk`: runs walks, readout protocols and Wigner analyses and writes the
//! results as CSV or JSON.
//!
//! Exit codes: 0 success, 2 malformed flags, 3 out-of-range values,
//! 4 Fock truncation, 5 I/O failure.

mod args;
mod run;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use qwalk_core::QwalkError;

use crate::args::Cli;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn range(flag: &str, reason: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: format!("--{flag}: {}", reason.into()),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: 5,
            message: message.into(),
        }
    }
}

impl From<QwalkError> for CliError {
    fn from(e: QwalkError) -> Self {
        match &e {
            QwalkError::Truncation { .. } | QwalkError::Compilation { .. } => Self {
                code: 4,
                message: format!("{e}; increase --fock-dim"),
            },
            QwalkError::Io(_) | QwalkError::Format(_) => Self::io(e.to_string()),
            QwalkError::NotNormalized { .. } => Self::range("coin", e.to_string()),
            QwalkError::InvalidParameter { name, .. } => {
                Self::range(&name.replace('_', "-"), e.to_string())
            }
            QwalkError::Fit(_) => Self {
                code: 3,
                message: e.to_string(),
            },
            QwalkError::DegenerateOutcome { .. } => Self {
                code: 1,
                message: e.to_string(),
            },
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses exit 2 for usage errors and 0 for --help/--version
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let start = Instant::now();
    match run::execute(&cli.command) {
        Ok(summary) => {
            let line = format!("{summary} ({:.3} s)", start.elapsed().as_secs_f64());
            if summary.to_stdout {
                eprintln!("{line}");
            } else {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qwalk: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

//! `gmrf`: simulate, estimate, compare and validate pairwise isotropic GMRFs.
//!
//! Exit codes: 0 ok, 2 usage or input error, 3 diverged simulation,
//! 4 degenerate field, 5 singular covariance, 6 validation out of tolerance.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError {
            code: 2,
            msg: msg.into(),
        }
    }
}

impl From<gmrf_core::GmrfError> for CliError {
    fn from(e: gmrf_core::GmrfError) -> Self {
        use gmrf_core::GmrfError::*;
        let code = match e {
            DivergedSimulation { .. } => 3,
            DegenerateField | DegenerateNeighborhood => 4,
            SingularCovariance => 5,
            _ => 2,
        };
        CliError {
            code,
            msg: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Kl(a) => commands::kl(a),
        Command::Validate(a) => commands::validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gmrf: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

mod args;
mod commands;
mod files;

use std::process::ExitCode;

use apstab_core::model::AssumptionReport;
use clap::Parser;
use thiserror::Error;

use args::{Cli, Command};

/// Exit statuses: 0 success, 1 input/assumption error, 2 infeasible,
/// 3 blow-up, 4 failed analysis assertion.
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_BLOW_UP: u8 = 3;
pub const EXIT_ASSERTION: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("model violates the standing assumptions")]
    Assumptions(AssumptionReport),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("APSTAB_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Certify => commands::certify(&cli.run),
        Command::Simulate => commands::simulate(&cli.run),
        Command::Analyze => commands::analyze(&cli.run),
        Command::Demo => commands::demo(&cli.run),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Assumptions(report)) => {
            eprintln!("error: model violates the standing assumptions");
            for c in report.failures() {
                eprintln!("  item {} ({}): {}", c.item, c.name, c.detail);
            }
            if let Ok(json) = serde_json::to_string_pretty(&report) {
                eprintln!("{json}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

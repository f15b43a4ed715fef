use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pdv_core::cli::{execute, Command};

/// Simulate and verify 2-factor and 4-factor path-dependent volatility models.
///
/// The worker count defaults to one per core and can be set with PDV_WORKERS.
#[derive(Parser)]
#[command(name = "pdv", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write one trajectory file per path and summary.json.
    Simulate { config: PathBuf },
    /// Run the configured checks and write report.json.
    Verify { config: PathBuf },
    /// Write the closed-form constants to constants.json.
    Constants { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, path) = match cli.command {
        Cmd::Simulate { config } => (Command::Simulate, config),
        Cmd::Verify { config } => (Command::Verify, config),
        Cmd::Constants { config } => (Command::Constants, config),
    };
    let code = execute(command, &path);
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}

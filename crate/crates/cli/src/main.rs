use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

mod cli;
mod commands;
mod input;
mod output;
mod verify;

use cli::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(args) => commands::analyze(args),
        Command::Attack(args) => commands::attack(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Verify(args) => verify::verify(args),
    };
    match result {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(outcome.stdout.as_bytes()).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            e.report();
            ExitCode::from(e.code as u8)
        }
    }
}

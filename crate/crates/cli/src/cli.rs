use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "qbc", version, about = "Entanglement attacks on quantum bit commitment protocols")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Concealing metrics: per-branch and entangled fidelities.
    Analyze(InputArgs),
    /// Synthesize Alice's cheating unitaries.
    Attack(AttackArgs),
    /// Run a family over a list of security parameters.
    Sweep(SweepArgs),
    /// Check numerical invariants on a protocol or on random protocols.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
    Csv,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Protocol file (`.qbc.json`).
    pub path: Option<PathBuf>,
    /// Built-in family instead of a file.
    #[arg(long, conflicts_with = "path")]
    pub family: Option<String>,
    /// Family parameter, `key=value`; repeatable.
    #[arg(long = "param", value_name = "K=V", requires = "family")]
    pub params: Vec<String>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report tolerance.
    #[arg(long, default_value_t = 1e-9, value_parser = parse_tol)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Also run the brute-force oracle and compare.
    #[arg(long)]
    pub oracle_check: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n_values: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Verify this many seeded random protocols instead of an input.
    #[arg(long, conflicts_with_all = ["path", "family"])]
    pub fuzz: Option<usize>,
}

fn parse_tol(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(t) if t.is_finite() && t >= 0.0 => Ok(t),
        _ => Err(format!("expected a finite non-negative number, got {s:?}")),
    }
}

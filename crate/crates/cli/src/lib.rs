//! Command-line frontend for the `degenctrl` toolkit.
//!
//! Exit codes: 0 success, 1 failed property check or I/O error, 2 invalid
//! configuration, 3 numerical failure.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::Parser;

pub mod commands;
pub mod config;
pub mod output;

use config::{env_precision, parse_kv, Overrides, RunConfig, Subcommand, PRECISION_ENV};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Failed(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Failed(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Failed(m) => write!(f, "checks failed:\n{m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<degenctrl::Error> for CliError {
    fn from(e: degenctrl::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "degenctrl",
    version,
    about = "Moment-method boundary null-controls for degenerate/singular heat equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct CommonArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Flat key=value file; flags take precedence over its entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, clap::Subcommand)]
enum Command {
    /// Bessel zeros, eigenvalues, normalization constants and boundary traces.
    Spectrum(CommonArgs),
    /// Gaps between consecutive square roots of eigenvalues.
    Gaps(CommonArgs),
    /// Biorthogonal family to the exponentials of the spectrum.
    Biortho(CommonArgs),
    /// Control for a seeded random unit datum, sampled on [0, T].
    Control(CommonArgs),
    /// Controlled trajectory with terminal coefficients and snapshots.
    Simulate(CommonArgs),
    /// Measured cost against the bound shapes over a parameter grid.
    CostSweep(CommonArgs),
    /// Property suite; exits nonzero on any failure.
    Verify(CommonArgs),
}

impl Command {
    fn split(self) -> (Subcommand, CommonArgs) {
        match self {
            Command::Spectrum(a) => (Subcommand::Spectrum, a),
            Command::Gaps(a) => (Subcommand::Gaps, a),
            Command::Biortho(a) => (Subcommand::Biortho, a),
            Command::Control(a) => (Subcommand::Control, a),
            Command::Simulate(a) => (Subcommand::Simulate, a),
            Command::CostSweep(a) => (Subcommand::CostSweep, a),
            Command::Verify(a) => (Subcommand::Verify, a),
        }
    }
}

/// Resolves the configuration for parsed arguments.
fn resolve(sub: Subcommand, args: CommonArgs, env: Option<&str>) -> Result<RunConfig, CliError> {
    let mut merged = Overrides { precision: env_precision(env)?, ..Default::default() };
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let (file_sub, file) = parse_kv(&text)?;
        if let Some(s) = file_sub {
            if s != sub {
                return Err(CliError::Config(format!("config file is for `{}`, not `{}`", s.name(), sub.name())));
            }
        }
        merged = merged.merge(file);
    }
    Ok(RunConfig::resolve(sub, merged.merge(args.overrides))?)
}

/// Runs one command and returns its resolved config, or the error to report.
pub fn run_config(cfg: &RunConfig) -> Result<String, CliError> {
    let artifact = commands::execute(cfg)?;
    std::fs::write(&cfg.out, &artifact.text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", cfg.out.display())))?;
    match artifact.failure {
        Some(e) => Err(e),
        None => Ok(format!("{}: {} -> {}", cfg.subcommand.name(), artifact.summary, cfg.out.display())),
    }
}

/// Parses `args` (including the program name) and runs; `env` stands in for
/// the precision environment variable.
pub fn run_with_env<I, T>(args: I, env: Option<&str>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (sub, common) = cli.command.split();
    let result = resolve(sub, common, env).and_then(|cfg| run_config(&cfg));
    match result {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("degenctrl: {e}");
            e.exit_code()
        }
    }
}

/// Entry point used by the binary.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env = std::env::var(PRECISION_ENV).ok();
    run_with_env(args, env.as_deref())
}

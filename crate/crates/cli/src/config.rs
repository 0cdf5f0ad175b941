//! Run configuration: defaults, environment, flat `key=value` files and flags,
//! merged in that order of increasing priority.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use degenctrl::biortho::Precision;
use degenctrl::spectrum::{ProblemParams, Side};
use serde::{Deserialize, Serialize};

pub const PRECISION_ENV: &str = "DEGENCTRL_PRECISION";

/// Marks the start and end of an embedded config block in CSV headers.
pub const CONFIG_BEGIN: &str = "# config-begin";
pub const CONFIG_END: &str = "# config-end";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Spectrum,
    Gaps,
    Biortho,
    Control,
    Simulate,
    CostSweep,
    Verify,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Spectrum => "spectrum",
            Subcommand::Gaps => "gaps",
            Subcommand::Biortho => "biortho",
            Subcommand::Control => "control",
            Subcommand::Simulate => "simulate",
            Subcommand::CostSweep => "cost-sweep",
            Subcommand::Verify => "verify",
        }
    }
}

impl FromStr for Subcommand {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Subcommand as clap::ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Format as clap::ValueEnum>::from_str(s, false)
    }
}

/// `single` runs at (alpha, mu, T); `default` uses the built-in grid of the command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GridChoice {
    Single,
    Default,
}

impl FromStr for GridChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <GridChoice as clap::ValueEnum>::from_str(s, false)
    }
}

/// Values that can come from a config file or the command line.
#[derive(Debug, Clone, Default, PartialEq, clap::Args)]
pub struct Overrides {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Time horizon.
    #[arg(long = "T", allow_hyphen_values = true)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub side: Option<Side>,
    /// Number of controlled modes.
    #[arg(long = "N")]
    pub modes: Option<usize>,
    /// Number of simulated modes (defaults to 2N).
    #[arg(long = "M")]
    pub sim_modes: Option<usize>,
    #[arg(long)]
    pub precision: Option<Precision>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_enum)]
    pub grid: Option<GridChoice>,
}

impl Overrides {
    /// Fields set in `other` replace those in `self`.
    pub fn merge(self, other: Overrides) -> Overrides {
        Overrides {
            alpha: other.alpha.or(self.alpha),
            mu: other.mu.or(self.mu),
            horizon: other.horizon.or(self.horizon),
            side: other.side.or(self.side),
            modes: other.modes.or(self.modes),
            sim_modes: other.sim_modes.or(self.sim_modes),
            precision: other.precision.or(self.precision),
            tol: other.tol.or(self.tol),
            seed: other.seed.or(self.seed),
            out: other.out.or(self.out),
            format: other.format.or(self.format),
            grid: other.grid.or(self.grid),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub alpha: f64,
    pub mu: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub side: Side,
    #[serde(rename = "N")]
    pub modes: usize,
    #[serde(rename = "M")]
    pub sim_modes: usize,
    pub precision: Precision,
    pub tol: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub grid: GridChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| ConfigError(format!("bad value for `{key}`: {e}")))
}

/// Parses a flat `key=value` file. Blank lines and `#` comments are skipped;
/// unknown or repeated keys are errors. A `subcommand` key is returned separately.
pub fn parse_kv(text: &str) -> Result<(Option<Subcommand>, Overrides), ConfigError> {
    let mut o = Overrides::default();
    let mut sub = None;
    let mut seen = std::collections::HashSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| ConfigError(format!("line {}: expected key=value", n + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(ConfigError(format!("line {}: duplicate key `{key}`", n + 1)));
        }
        match key {
            "subcommand" => sub = Some(parse_value(key, value)?),
            "alpha" => o.alpha = Some(parse_value(key, value)?),
            "mu" => o.mu = Some(parse_value(key, value)?),
            "T" => o.horizon = Some(parse_value(key, value)?),
            "side" => o.side = Some(parse_value(key, value)?),
            "N" => o.modes = Some(parse_value(key, value)?),
            "M" => o.sim_modes = Some(parse_value(key, value)?),
            "precision" => o.precision = Some(parse_value(key, value)?),
            "tol" => o.tol = Some(parse_value(key, value)?),
            "seed" => o.seed = Some(parse_value(key, value)?),
            "out" => o.out = Some(PathBuf::from(value)),
            "format" => o.format = Some(parse_value(key, value)?),
            "grid" => o.grid = Some(parse_value(key, value)?),
            other => return Err(ConfigError(format!("line {}: unknown key `{other}`", n + 1))),
        }
    }
    Ok((sub, o))
}

/// Default precision, honouring [`PRECISION_ENV`] when set.
pub fn env_precision(value: Option<&str>) -> Result<Option<Precision>, ConfigError> {
    match value {
        None => Ok(None),
        Some(v) => v.trim().parse().map(Some).map_err(|e| ConfigError(format!("{PRECISION_ENV}: {e}"))),
    }
}

impl RunConfig {
    /// Fills unset values with defaults and validates the result.
    pub fn resolve(subcommand: Subcommand, o: Overrides) -> Result<RunConfig, ConfigError> {
        let precision = o.precision.unwrap_or_default();
        let modes = o.modes.unwrap_or_else(|| precision.default_n());
        let format = o.format.unwrap_or(Format::Csv);
        let cfg = RunConfig {
            subcommand,
            alpha: o.alpha.unwrap_or(0.0),
            mu: o.mu.unwrap_or(0.0),
            horizon: o.horizon.unwrap_or(1.0),
            side: o.side.unwrap_or(Side::Right),
            modes,
            sim_modes: o.sim_modes.unwrap_or(2 * modes),
            precision,
            tol: o.tol.unwrap_or(1e-10),
            seed: o.seed.unwrap_or(42),
            out: o.out.unwrap_or_else(|| PathBuf::from(format!("{}.{}", subcommand.name(), format.extension()))),
            format,
            grid: o.grid.unwrap_or(GridChoice::Single),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        ProblemParams::new(self.alpha, self.mu, self.horizon).map_err(|e| ConfigError(e.to_string()))?;
        if self.modes == 0 {
            return Err(ConfigError("N must be at least 1".into()));
        }
        if self.sim_modes < self.modes {
            return Err(ConfigError(format!("M = {} is below N = {}", self.sim_modes, self.modes)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(ConfigError(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    pub fn params(&self) -> ProblemParams {
        ProblemParams::new(self.alpha, self.mu, self.horizon).expect("validated on resolve")
    }

    /// `key=value` lines in a fixed order; floats use the shortest round-trip form.
    pub fn to_kv(&self) -> String {
        format!(
            "subcommand={}\nalpha={:?}\nmu={:?}\nT={:?}\nside={}\nN={}\nM={}\nprecision={}\ntol={:?}\nseed={}\nout={}\nformat={}\ngrid={}\n",
            self.subcommand.name(),
            self.alpha,
            self.mu,
            self.horizon,
            self.side,
            self.modes,
            self.sim_modes,
            self.precision,
            self.tol,
            self.seed,
            self.out.display(),
            self.format.extension(),
            match self.grid {
                GridChoice::Single => "single",
                GridChoice::Default => "default",
            }
        )
    }

    /// Re-reads a config from `key=value` text, as produced by [`RunConfig::to_kv`].
    pub fn from_kv(text: &str) -> Result<RunConfig, ConfigError> {
        let (sub, o) = parse_kv(text)?;
        let sub = sub.ok_or_else(|| ConfigError("missing `subcommand`".into()))?;
        RunConfig::resolve(sub, o)
    }

    /// Extracts the block between [`CONFIG_BEGIN`] and [`CONFIG_END`] of a CSV header.
    pub fn from_csv_header(text: &str) -> Result<RunConfig, ConfigError> {
        let mut inside = false;
        let mut kv = String::new();
        for line in text.lines() {
            if line == CONFIG_BEGIN {
                inside = true;
            } else if line == CONFIG_END {
                return RunConfig::from_kv(&kv);
            } else if inside {
                let body =
                    line.strip_prefix("# ").ok_or_else(|| ConfigError(format!("malformed header line `{line}`")))?;
                kv.push_str(body);
                kv.push('\n');
            }
        }
        Err(ConfigError("no embedded config block".into()))
    }
}

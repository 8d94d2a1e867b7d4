//! Command-line and config-file parameters.
//!
//! Every parameter can come from a flag or from a flat TOML file passed with
//! `--config`; keys in the file are the flag names without dashes
//! (`snr-db = 0.0`). Flags win.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "rtgmi",
    version,
    about = "Capacity, GMI and recursive-training experiments over correlated Rayleigh fading"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Capacity,
    Gmi,
    Ladder,
    Simulate,
    Sweep,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// PSK capacity of the coherent memoryless channel at one SNR.
    Capacity(Invocation),
    /// GMI of one PSC block, with the Λ̂(μ) curve.
    Gmi(Invocation),
    /// Per-PSC capacities of the virtual system and the L-average.
    Ladder(Invocation),
    /// End-to-end recursive-training simulation.
    Simulate(Invocation),
    /// Capacity or L-average over an SNR grid.
    Sweep(Invocation),
}

impl Command {
    pub fn split(self) -> (CommandKind, Invocation) {
        match self {
            Command::Capacity(i) => (CommandKind::Capacity, i),
            Command::Gmi(i) => (CommandKind::Gmi, i),
            Command::Ladder(i) => (CommandKind::Ladder, i),
            Command::Simulate(i) => (CommandKind::Simulate, i),
            Command::Sweep(i) => (CommandKind::Sweep, i),
        }
    }
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Capacity => "capacity",
            CommandKind::Gmi => "gmi",
            CommandKind::Ladder => "ladder",
            CommandKind::Simulate => "simulate",
            CommandKind::Sweep => "sweep",
        }
    }

    /// Keys this command reads, besides the output keys.
    fn keys(self) -> &'static [&'static str] {
        match self {
            CommandKind::Capacity => &["constellation", "snr-db", "samples", "seed"],
            CommandKind::Gmi => &[
                "constellation",
                "snr-db",
                "model",
                "alpha",
                "doppler",
                "table",
                "K",
                "block",
                "depth",
                "psc",
                "predictor-order",
                "mu-min",
                "mu-max",
                "seed",
            ],
            CommandKind::Ladder => &[
                "constellation",
                "snr-db",
                "model",
                "alpha",
                "doppler",
                "table",
                "depth",
                "predictor-order",
                "samples",
                "lambda",
                "delta",
                "seed",
            ],
            CommandKind::Simulate => &[
                "constellation",
                "snr-db",
                "model",
                "alpha",
                "doppler",
                "table",
                "depth",
                "K",
                "rate-fraction",
                "predictor-order",
                "trials",
                "lambda",
                "delta",
                "genie",
                "backend",
                "gmi-samples",
                "seed",
            ],
            CommandKind::Sweep => &[
                "constellation",
                "snr-db",
                "quantity",
                "samples",
                "model",
                "alpha",
                "doppler",
                "table",
                "depth",
                "predictor-order",
                "seed",
            ],
        }
    }
}

#[derive(Debug, Args)]
pub struct Invocation {
    /// TOML file with parameters; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub params: Params,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ar1,
    Clarke,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    /// Fading estimate and residual noise drawn as stationary processes.
    #[default]
    Stationary,
    /// One PSC of an interleaved scheme, built from a fading path.
    Interleaved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Auto,
    Exhaustive,
    Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    #[default]
    Capacity,
    Ladder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

/// A number or a string in the config file; both become flag text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Text {
    Number(f64),
    Text(String),
}

impl fmt::Display for Text {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Text::Number(v) => write!(f, "{v}"),
            Text::Text(s) => f.write_str(s),
        }
    }
}

impl FromStr for Text {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Text::Text(s.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Params {
    /// bpsk, qpsk, 8psk, 16psk or a point count.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constellation: Option<Text>,
    /// SNR in dB; `start:step:stop` for a grid.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<Text>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    /// AR(1) coefficient.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Clarke normalized Doppler `f_D·T_s`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doppler: Option<f64>,
    /// CSV autocorrelation table (`lag,re,im`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    /// Block length.
    #[arg(long = "K", visible_alias = "block-len")]
    #[serde(
        rename = "K",
        alias = "block-len",
        skip_serializing_if = "Option::is_none"
    )]
    pub block_len: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block: Option<BlockKind>,
    /// Interleaving depth L.
    #[arg(long, visible_alias = "L")]
    #[serde(alias = "L", skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// PSC index for `--block interleaved`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psc: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictor_order: Option<usize>,
    /// Monte Carlo samples.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_fraction: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Feed back the transmitted symbols instead of the decoded ones.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub genie: Option<bool>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendKind>,
    /// Path length for the per-PSC GMI estimates.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gmi_samples: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantity: Option<Quantity>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing)]
    pub format: Option<Format>,
    /// Also write SVG plots.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing)]
    pub plot: Option<bool>,
}

/// Why a run stopped; each kind has its own exit code.
#[derive(Debug)]
pub enum Failure {
    Numerical(String),
    Config(String),
    Output(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Numerical(_) => 1,
            Failure::Config(_) => 2,
            Failure::Output(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Numerical(m) => write!(f, "numerical consistency failure: {m}"),
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Output(m) => write!(f, "cannot write output: {m}"),
        }
    }
}

impl From<rtgmi::Error> for Failure {
    fn from(e: rtgmi::Error) -> Self {
        use rtgmi::Error as E;
        match e {
            E::InternalConsistency(_) | E::NumericalRank(_) => Failure::Numerical(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

pub type Outcome<T> = std::result::Result<T, Failure>;

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

impl Params {
    /// Flags in `self` override values from `file`.
    pub fn over(self, file: Params) -> Params {
        Params {
            constellation: self.constellation.or(file.constellation),
            snr_db: self.snr_db.or(file.snr_db),
            model: self.model.or(file.model),
            alpha: self.alpha.or(file.alpha),
            doppler: self.doppler.or(file.doppler),
            table: self.table.or(file.table),
            block_len: self.block_len.or(file.block_len),
            block: self.block.or(file.block),
            depth: self.depth.or(file.depth),
            psc: self.psc.or(file.psc),
            predictor_order: self.predictor_order.or(file.predictor_order),
            samples: self.samples.or(file.samples),
            mu_min: self.mu_min.or(file.mu_min),
            mu_max: self.mu_max.or(file.mu_max),
            rate_fraction: self.rate_fraction.or(file.rate_fraction),
            trials: self.trials.or(file.trials),
            lambda: self.lambda.or(file.lambda),
            delta: self.delta.or(file.delta),
            genie: self.genie.or(file.genie),
            backend: self.backend.or(file.backend),
            gmi_samples: self.gmi_samples.or(file.gmi_samples),
            quantity: self.quantity.or(file.quantity),
            seed: self.seed.or(file.seed),
            output_dir: self.output_dir.or(file.output_dir),
            format: self.format.or(file.format),
            plot: self.plot.or(file.plot),
        }
    }

    fn present(&self) -> Vec<&'static str> {
        let flags = [
            ("constellation", self.constellation.is_some()),
            ("snr-db", self.snr_db.is_some()),
            ("model", self.model.is_some()),
            ("alpha", self.alpha.is_some()),
            ("doppler", self.doppler.is_some()),
            ("table", self.table.is_some()),
            ("K", self.block_len.is_some()),
            ("block", self.block.is_some()),
            ("depth", self.depth.is_some()),
            ("psc", self.psc.is_some()),
            ("predictor-order", self.predictor_order.is_some()),
            ("samples", self.samples.is_some()),
            ("mu-min", self.mu_min.is_some()),
            ("mu-max", self.mu_max.is_some()),
            ("rate-fraction", self.rate_fraction.is_some()),
            ("trials", self.trials.is_some()),
            ("lambda", self.lambda.is_some()),
            ("delta", self.delta.is_some()),
            ("genie", self.genie.is_some()),
            ("backend", self.backend.is_some()),
            ("gmi-samples", self.gmi_samples.is_some()),
            ("quantity", self.quantity.is_some()),
            ("seed", self.seed.is_some()),
        ];
        flags
            .into_iter()
            .filter(|(_, set)| *set)
            .map(|(k, _)| k)
            .collect()
    }

    /// Rejects parameters the command does not read.
    pub fn check_keys(&self, command: CommandKind) -> Outcome<()> {
        match self
            .present()
            .into_iter()
            .find(|k| !command.keys().contains(k))
        {
            Some(k) => Err(config_err(format!(
                "key `{k}` is not used by `{}`",
                command.name()
            ))),
            None => Ok(()),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("results"))
    }
}

/// Reads a `--config` file.
pub fn load_file(path: &Path) -> Outcome<Params> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {}", path.display(), e.message())))
}

pub fn require<T: Clone>(value: &Option<T>, key: &str) -> Outcome<T> {
    value
        .clone()
        .ok_or_else(|| config_err(format!("missing required key `{key}`")))
}

pub fn parse_constellation(text: &Text) -> Outcome<usize> {
    let s = text.to_string().to_ascii_lowercase();
    let n = match s.as_str() {
        "bpsk" => Some(2),
        "qpsk" => Some(4),
        _ => s.strip_suffix("psk").unwrap_or(&s).parse::<usize>().ok(),
    };
    match n {
        Some(j) if (1..=65536).contains(&j) => Ok(j),
        _ => Err(config_err(format!(
            "key `constellation`: expected bpsk, qpsk, <n>psk or a count in 1..=65536, got `{s}`"
        ))),
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// A single dB value or an inclusive `start:step:stop` grid.
pub fn parse_snr_grid(text: &Text) -> Outcome<Vec<f64>> {
    let s = text.to_string();
    let bad = || {
        config_err(format!(
            "key `snr-db`: expected a number or start:step:stop, got `{s}`"
        ))
    };
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    if parts.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    match parts[..] {
        [v] => Ok(vec![v]),
        [start, step, stop] if step > 0.0 && start <= stop => {
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| start + i as f64 * step).collect())
        }
        _ => Err(bad()),
    }
}

pub fn parse_snr_single(text: &Text) -> Outcome<f64> {
    match parse_snr_grid(text)?[..] {
        [v] => Ok(v),
        _ => Err(config_err(
            "key `snr-db`: a grid is only accepted by `sweep`",
        )),
    }
}

pub fn fading_model(params: &Params) -> Outcome<Option<rtgmi::FadingModel>> {
    use rtgmi::FadingModel;
    let model = match params.model {
        None => return Ok(None),
        Some(ModelKind::Ar1) => FadingModel::ar1(require(&params.alpha, "alpha")?)?,
        Some(ModelKind::Clarke) => FadingModel::clarke(require(&params.doppler, "doppler")?)?,
        Some(ModelKind::Table) => {
            let path = require(&params.table, "table")?;
            FadingModel::from_csv_path(&path)
                .map_err(|e| config_err(format!("key `table` ({}): {e}", path.display())))?
        }
    };
    Ok(Some(model))
}

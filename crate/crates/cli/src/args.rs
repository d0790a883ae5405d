use std::path::PathBuf;

use catscope::tabular::parse_date;
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// MCA, Welch t-tests and AR forecasting over categorical record tables.
#[derive(Debug, Parser)]
#[command(name = "catscope", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a CSV file and report row counts and field coverage.
    IngestCheck(IngestCheckArgs),
    /// Multiple correspondence analysis of categorical fields.
    Mca(McaArgs),
    /// Welch t-tests on daily accident counts split by a rule.
    Ttest(TtestArgs),
    /// Autoregressive forecast of monthly counts.
    Forecast(ForecastArgs),
    /// Generate a synthetic dataset in the standard CSV layout.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input CSV file.
    #[arg(long)]
    pub input: PathBuf,
    /// Schema map (TOML). Defaults to the layout written by `synth`.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// First date of the analysis window (YYYY-MM-DD or DD/MM/YYYY).
    #[arg(long, value_parser = date_arg)]
    pub from: Option<NaiveDate>,
    /// Last date of the analysis window, inclusive.
    #[arg(long, value_parser = date_arg)]
    pub to: Option<NaiveDate>,
    /// Fail on the first malformed row instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Output formats, comma separated or repeated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv")]
    pub format: Vec<Format>,
}

#[derive(Debug, Args)]
pub struct IngestCheckArgs {
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Args)]
pub struct McaArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Number of dimensions to report.
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    /// Logical fields to analyse, comma separated. Defaults to every mapped
    /// categorical field plus day_of_week.
    #[arg(long, value_delimiter = ',')]
    pub vars: Vec<String>,
    /// Report standard instead of principal category coordinates.
    #[arg(long)]
    pub standard: bool,
    /// Add Benzécri-adjusted inertia percentages to the inertia table.
    #[arg(long)]
    pub benzecri: bool,
}

#[derive(Debug, Args)]
pub struct TtestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Split rule: season | sex | flag:FIELD | window:FROM:TO | age:SETA:SETB
    /// (band sets comma separated). Repeat for several tests.
    #[arg(long, default_value = "season")]
    pub rule: Vec<String>,
    /// Confidence level of the reported interval.
    #[arg(long, default_value_t = 0.95)]
    pub gamma: f64,
    /// Significance level for the reject/accept decision.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Onestep,
    Recursive,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Fixed AR order.
    #[arg(long, conflicts_with = "p_max")]
    pub p: Option<usize>,
    /// Largest order considered by AIC selection.
    #[arg(long, default_value_t = 13)]
    pub p_max: usize,
    /// Trailing months held out for evaluation.
    #[arg(long, default_value_t = 12)]
    pub holdout: usize,
    /// Months to forecast; defaults to the holdout length.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_enum, default_value = "onestep")]
    pub mode: Mode,
    /// Model first differences instead of levels.
    #[arg(long)]
    pub diff: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for records.csv and schema.toml.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Generator spec (TOML); flags below override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long, value_parser = date_arg)]
    pub from: Option<NaiveDate>,
    #[arg(long, value_parser = date_arg)]
    pub to: Option<NaiveDate>,
    /// Extra expected accidents per day in June to August.
    #[arg(long)]
    pub summer_shift: Option<f64>,
    /// Attribute association FROM:TO:STRENGTH, e.g. weather:vehicle_type:0.8.
    #[arg(long, value_parser = assoc_arg)]
    pub assoc: Vec<(String, String, f64)>,
}

fn date_arg(s: &str) -> Result<NaiveDate, String> {
    parse_date(s).ok_or_else(|| format!("`{s}` is not a date (YYYY-MM-DD or DD/MM/YYYY)"))
}

fn assoc_arg(s: &str) -> Result<(String, String, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [from, to, v] = parts.as_slice() else {
        return Err(format!("`{s}` is not FROM:TO:STRENGTH"));
    };
    let v: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((from.to_string(), to.to_string(), v))
}

//! Command-line surface: subcommands, flags, and argument validation.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::PathBuf;

use bellsim_core::{ModelKind, OrderPolicy};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bellsim",
    version,
    about = "Seeded spin-pair experiments, counterfactual tables, and inequality reports",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one batch of pairs and report its correlation.
    SingletRun(SingletArgs),
    /// Measure fresh particles along a fixed axis sequence.
    ChainRun(ChainArgs),
    /// Four-term inequality experiment over four pair batches.
    Chsh(AbiArgs),
    /// Three-term inequality experiment over three pair batches.
    V3(AbiArgs),
    /// Fill a counterfactual value table and audit its joint use.
    McdTable(McdArgs),
    /// Recompute a saved run from its ledger and check it matches.
    AuditReplay(ReplayArgs),
    /// Enumerate the sign-table bounds exhaustively.
    BoundOracle,
    /// Rebuild estimates from CSV files and evaluate them.
    Ingest(IngestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Rows to generate (pairs per batch, or chains).
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,

    /// RNG seed. Falls back to BELLSIM_SEED, then to 0.
    #[arg(long, env = "BELLSIM_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Write events CSV, summary JSON, and ledger JSON here instead of
    /// printing the summary to stdout.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    /// Measure the p side first in every pair.
    PFirst,
    /// Measure the p' side first in every pair.
    PpFirst,
    /// Draw the order per pair from the seeded order stream.
    Random,
}

impl From<OrderArg> for OrderPolicy {
    fn from(arg: OrderArg) -> OrderPolicy {
        match arg {
            OrderArg::PFirst => OrderPolicy::PFirst,
            OrderArg::PpFirst => OrderPolicy::PPrimeFirst,
            OrderArg::Random => OrderPolicy::Random,
        }
    }
}

pub fn order_name(arg: OrderArg) -> &'static str {
    match arg {
        OrderArg::PFirst => "p-first",
        OrderArg::PpFirst => "pp-first",
        OrderArg::Random => "random",
    }
}

fn parse_angle(s: &str) -> Result<f64, String> {
    let value: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !value.is_finite() {
        return Err(format!("angle `{s}` must be finite (radians)"));
    }
    Ok(value)
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct SingletArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Pair-generation model: qm or lhv_sign.
    #[arg(long, default_value = "qm", value_parser = parse_model)]
    pub model: ModelKind,

    /// Measurement angles in radians: one for p, one for p'.
    #[arg(long, value_delimiter = ',', value_parser = parse_angle,
          default_values_t = [0.0, FRAC_PI_4])]
    pub angles: Vec<f64>,

    #[arg(long, value_enum, default_value_t = OrderArg::Random)]
    pub order: OrderArg,

    /// Keep a running-mean trace and report when it stabilizes.
    #[arg(long)]
    pub retain_history: bool,

    /// Stabilization band around the final value for --retain-history.
    #[arg(long, default_value_t = 0.01)]
    pub band: f64,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Axis sequence in radians; each particle is measured along all of
    /// them in order.
    #[arg(long, value_delimiter = ',', value_parser = parse_angle,
          default_values_t = [0.0, FRAC_PI_4, FRAC_PI_2])]
    pub angles: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct AbiArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Pair-generation model: qm or lhv_sign.
    #[arg(long, default_value = "qm", value_parser = parse_model)]
    pub model: ModelKind,

    /// Measurement angles in radians: x,w,y,z for chsh; x,y,z for v3.
    /// Defaults to the model-violating presets.
    #[arg(long, value_delimiter = ',', value_parser = parse_angle)]
    pub angles: Option<Vec<f64>>,

    #[arg(long, value_enum, default_value_t = OrderArg::Random)]
    pub order: OrderArg,
}

/// Angles giving the maximal four-term violation under pair statistics.
pub const CHSH_PRESET: [f64; 4] = [0.0, FRAC_PI_2, FRAC_PI_4, 7.0 * FRAC_PI_4];

/// Angles giving the maximal three-term violation under pair statistics.
pub const V3_PRESET: [f64; 3] = [0.0, 0.0, PI];

#[derive(Debug, Args)]
pub struct McdArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Table-filling model: mcd_lhv or mcd_qm_collapse.
    #[arg(long, default_value = "mcd_lhv", value_parser = parse_model)]
    pub model: ModelKind,

    /// Axis set in radians; the first two are the actually measured axes
    /// (p, then p').
    #[arg(long, value_delimiter = ',', value_parser = parse_angle,
          default_values_t = [0.0, FRAC_PI_4])]
    pub axis_set: Vec<f64>,

    #[arg(long, value_enum, default_value_t = OrderArg::Random)]
    pub order: OrderArg,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Directory holding summary.json and ledger.json from a previous run.
    #[arg(long = "in")]
    pub in_dir: PathBuf,

    /// Write the replay report here instead of printing it.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IngestKind {
    /// Decide from the number of files (events) or columns (signs).
    Auto,
    /// One correlation estimate.
    Correlation,
    /// Three-term inequality.
    V3,
    /// Four-term inequality.
    V4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IngestFormat {
    /// Event logs as written by the run subcommands.
    Events,
    /// One CSV of labeled +/-1 columns sharing row alignment.
    Signs,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Input CSV files: one per term for events, exactly one for signs.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,

    #[arg(long, value_enum, default_value_t = IngestKind::Auto)]
    pub kind: IngestKind,

    #[arg(long, value_enum, default_value_t = IngestFormat::Events)]
    pub format: IngestFormat,

    /// Write the summary here instead of printing it.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

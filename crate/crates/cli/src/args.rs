use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mfdp::ct_oracle::FamilyKind;
use mfdp::HypothesisShape;
use serde::Serialize;

/// Median-unbiased FDP estimation and median-FDP control.
#[derive(Debug, Parser, Serialize)]
#[command(name = "mfdp", version, about)]
pub struct Cli {
    /// Seed for every random draw. Unseeded runs draw one and print it.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub seed: Option<u64>,

    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,

    /// Emit CSV on stdout instead of JSON.
    #[arg(long, global = true)]
    pub csv: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Estimate the FDP of the hypotheses whose statistics exceed a threshold.
    Estimate(EstimateArgs),
    /// Choose a rejection threshold controlling the median of the FDP.
    Control(ControlArgs),
    /// Per-hypothesis p-values under a guessed null density.
    Pvalues(PvaluesArgs),
    /// Run a Monte Carlo study described by a JSON spec.
    Simulate(SimulateArgs),
    /// Check the shortcut estimators against brute-force closed testing.
    VerifyCt(VerifyCtArgs),
    /// Exact sign-flip or two-group permutation test of a single column.
    ExactTest(ExactTestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeArg {
    /// H_j: mu_j <= delta_j
    Directional,
    /// H_j: |mu_j| >= delta_j
    Equivalence,
}

impl From<ShapeArg> for HypothesisShape {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Directional => HypothesisShape::DirectionalRight,
            ShapeArg::Equivalence => HypothesisShape::Equivalence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticArg {
    /// Column means of one-sample data.
    ColumnMean,
    /// Column sums scaled by n^-1/2.
    ScaledSum,
    /// n^1/2 times the difference of group means (equal groups).
    TwoGroup,
    /// Welch t-statistics; zero-variance columns are dropped.
    Welch,
}

/// Where the statistics come from and which hypotheses they test.
#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// Statistics CSV with a `statistic` column and, unless --delta or
    /// --margins is given, a `margin` column.
    #[arg(required_unless_present = "data", conflicts_with = "data")]
    pub input: Option<PathBuf>,

    /// Raw data CSV (rows are observations; an optional `group` column
    /// labels two groups). Requires --statistic.
    #[arg(long, requires = "statistic")]
    pub data: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub statistic: Option<StatisticArg>,

    #[arg(long, value_enum)]
    pub shape: ShapeArg,

    /// Common margin on the statistic scale. For two-group data the mean of
    /// the statistic is n^1/2 times the mean difference.
    #[arg(long, conflicts_with = "margins", allow_negative_numbers = true)]
    pub delta: Option<f64>,

    /// CSV with a `margin` column, one row per hypothesis.
    #[arg(long)]
    pub margins: Option<PathBuf>,

    /// Also write the statistics used to this CSV (re-readable as input).
    #[arg(long)]
    pub write_statistics: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    Plain,
    /// Directional only; a seeded coin breaks R(t) = R-(t) ties.
    Randomized,
    /// Equivalence only; needs independent unimodal null statistics.
    Windowed,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Rejection threshold.
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,

    #[arg(long, value_enum, default_value_t = EstimateMethod::Plain)]
    pub method: EstimateMethod,
}

#[derive(Debug, Args, Serialize)]
pub struct ControlArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Target for the median of the FDP, in [0, 1).
    #[arg(long)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullArg {
    StdNormal,
    /// Normal with standard deviation --sigma.
    Normal,
    /// Student t with --df degrees of freedom.
    StudentT,
}

#[derive(Debug, Args, Serialize)]
pub struct PvaluesArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long, value_enum, default_value_t = NullArg::StdNormal)]
    pub null: NullArg,

    #[arg(long, required_if_eq("null", "normal"))]
    pub sigma: Option<f64>,

    #[arg(long, required_if_eq("null", "student-t"))]
    pub df: Option<f64>,

    /// Also run Benjamini-Hochberg at this level.
    #[arg(long)]
    pub bh: Option<f64>,

    /// Also run the Lehmann-Romano step-down at this gamma (confidence 0.5).
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Study spec JSON. A `seed` field is used unless --seed is given.
    #[arg(long)]
    pub spec: PathBuf,

    /// Also write the metric table CSV here.
    #[arg(long)]
    pub table: Option<PathBuf>,

    /// Run replicates on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    /// Every family below.
    All,
    DirectionalBasic,
    DirectionalRandomized,
    EquivalenceBasic,
    EquivalenceWindowed,
    SamSubset,
}

impl FamilyArg {
    pub fn kinds(self) -> Vec<FamilyKind> {
        match self {
            FamilyArg::All => vec![
                FamilyKind::DirectionalBasic,
                FamilyKind::DirectionalRandomized,
                FamilyKind::EquivalenceBasic,
                FamilyKind::EquivalenceWindowed,
                FamilyKind::SamSubset,
            ],
            FamilyArg::DirectionalBasic => vec![FamilyKind::DirectionalBasic],
            FamilyArg::DirectionalRandomized => vec![FamilyKind::DirectionalRandomized],
            FamilyArg::EquivalenceBasic => vec![FamilyKind::EquivalenceBasic],
            FamilyArg::EquivalenceWindowed => vec![FamilyKind::EquivalenceWindowed],
            FamilyArg::SamSubset => vec![FamilyKind::SamSubset],
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyCtArgs {
    /// Largest number of hypotheses per instance.
    #[arg(long, default_value_t = 8)]
    pub m: usize,

    #[arg(long, default_value_t = 500)]
    pub instances: usize,

    #[arg(long, value_enum, default_value_t = FamilyArg::All)]
    pub family: FamilyArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExactKind {
    /// One sample, H0: theta <= 0, all 2^n sign patterns.
    SignFlip,
    /// Two equal groups, H0: theta_1 - theta_2 <= 0.
    Permutation,
}

#[derive(Debug, Args, Serialize)]
pub struct ExactTestArgs {
    /// Data CSV; the permutation test needs a `group` column.
    pub data: PathBuf,

    #[arg(long, value_enum)]
    pub kind: ExactKind,

    /// Column to test (default: the first data column).
    #[arg(long)]
    pub column: Option<String>,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Permutation test only: identity plus B - 1 random splits instead of
    /// all of them.
    #[arg(long)]
    pub transformations: Option<usize>,
}

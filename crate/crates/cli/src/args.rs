use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "wcluster", version, about = "Wasserstein K-means for Gaussian measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarize a panel CSV into one measures file per period.
    Ingest(IngestArgs),
    /// Cluster a measures file.
    Cluster(ClusterArgs),
    /// Cluster for every K in a range and tabulate the compactness index.
    GciScan(ScanArgs),
    /// Print the Wasserstein distance between two measures.
    Distance(DistanceArgs),
    /// Write the weighted barycenter of a measures file.
    Barycenter(BarycenterArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Denominator {
    #[value(name = "n-1")]
    #[serde(rename = "n-1")]
    NMinus1,
    #[value(name = "n")]
    #[serde(rename = "n")]
    N,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    Random,
    Farthest,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Panel CSV with header `entity,date,v1,...,vd`.
    #[arg(long)]
    pub input: PathBuf,
    /// Period CSV with header `name,start,end`.
    #[arg(long)]
    pub periods: PathBuf,
    /// Output directory; one `<period>.json` per period.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "n-1")]
    pub cov_denominator: Denominator,
    /// Covariance repair jitter, relative to the mean variance.
    #[arg(long, default_value_t = 1e-8)]
    pub jitter: f64,
    /// Fewest rows an entity needs in a period (default: d + 1).
    #[arg(long)]
    pub min_records: Option<usize>,
    /// Fail on the first malformed row instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ClusterOptions {
    #[arg(long, value_enum, default_value = "random")]
    pub init: Init,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    #[arg(long)]
    pub measures: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub options: ClusterOptions,
    /// Also compute and write the compactness reports.
    #[arg(long)]
    pub reports: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanArgs {
    #[arg(long)]
    pub measures: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub kmin: usize,
    #[arg(long)]
    pub kmax: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub options: ClusterOptions,
    /// Mark the smallest K whose total index is within 0.02 of the maximum.
    #[arg(long)]
    pub suggest_k: bool,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DistanceArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Compare dispersions only, ignoring locations.
    #[arg(long)]
    pub bures: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct BarycenterArgs {
    #[arg(long)]
    pub measures: PathBuf,
    /// Comma-separated weights summing to 1 (default: equal).
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Output JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

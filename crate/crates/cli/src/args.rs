use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use netcoh::Family;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "netcoh", version, about = "Regression with network cohesion")]
pub struct Cli {
    /// Worker threads (default: available parallelism). NETCOH_THREADS takes precedence.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model on a network and write the estimates.
    Fit(FitArgs),
    /// Predict individual effects and responses for new nodes.
    Predict(PredictArgs),
    /// Choose lambda by k-fold cross-validation.
    Cv(CvArgs),
    /// Run one of the simulation studies and write a tidy CSV.
    Simulate(SimulateArgs),
    /// Spectrally sparsify a weighted graph.
    Sparsify(SparsifyArgs),
    /// Evaluate bias, MSE and the OLS comparison for known parameters.
    Theory(TheoryArgs),
}

/// Network and node-table inputs shared by the fitting commands.
#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Edge list: "u v [w]" per line, tab, comma or space separated.
    #[arg(long)]
    pub edges: PathBuf,
    /// CSV with a header and one row per node.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column (linear and logistic).
    #[arg(long, default_value = "y")]
    pub response: String,
    /// Survival time column (Cox).
    #[arg(long, default_value = "time")]
    pub time_column: String,
    /// Event indicator column (Cox), 1 for an observed event.
    #[arg(long, default_value = "event")]
    pub event_column: String,
    /// Node label column; used automatically when a column named "id" exists.
    /// Without labels, edge endpoints are row numbers starting at 0.
    #[arg(long)]
    pub id_column: Option<String>,
    /// Comma-separated covariate columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "linear")]
    pub family: Family,
    #[arg(long)]
    pub lambda: f64,
    /// Ridge added to the Laplacian (default 0 for linear, 0.01 logistic, 0.1 Cox).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Relative tolerance of the iterative linear solves.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Model file written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Edge list of the enlarged network (training plus new nodes).
    #[arg(long)]
    pub edges: PathBuf,
    /// Covariates of the nodes to predict, one row per node.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub id_column: Option<String>,
    /// Ridge of the prediction solve (default: the model's gamma).
    #[arg(long)]
    pub gamma_pred: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "linear")]
    pub family: Family,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Lambda grid: "lo:hi:count" (log-spaced) or a comma-separated list.
    #[arg(long, default_value = "0.001:100:20")]
    pub grid: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Ridge used to predict held-out effects (default: gamma).
    #[arg(long)]
    pub gamma_pred: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// 1: bias-variance path, 2: linear study, 3: logistic study, 4: sparsification.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub figure: u8,
    /// Multiplies the default number of replications.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n: Option<usize>,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    /// Comma-separated within-block spreads (figures 2 and 3).
    #[arg(long, value_delimiter = ',')]
    pub s_grid: Option<Vec<f64>>,
    /// Comma-separated sparsification levels (figure 4).
    #[arg(long, value_delimiter = ',')]
    pub epsilon_grid: Option<Vec<f64>>,
    /// Sampling constant of the sparsifier (figure 4).
    #[arg(long)]
    pub oversampling: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SparsifyArgs {
    #[arg(long)]
    pub edges: PathBuf,
    /// Node count; defaults to the largest integer id plus one, or the number
    /// of distinct labels.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = netcoh::sparsify::DEFAULT_OVERSAMPLING)]
    pub oversampling: f64,
    /// Skip the dense spectral check.
    #[arg(long)]
    pub no_verify: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TheoryArgs {
    /// Use the three-component illustration instead of input files.
    #[arg(long, conflicts_with_all = ["edges", "data"])]
    pub example1: bool,
    /// With --example1, replace the random components by their expected adjacency.
    #[arg(long, requires = "example1")]
    pub expected_adjacency: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, required_unless_present = "example1")]
    pub edges: Option<PathBuf>,
    /// CSV with the true effects and the covariates.
    #[arg(long, required_unless_present = "example1")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "alpha")]
    pub alpha_column: String,
    #[arg(long)]
    pub id_column: Option<String>,
    /// Comma-separated true coefficients, one per covariate.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Default 0.1.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long)]
    pub out: PathBuf,
}

//! Clap argument definitions for the three subcommands.

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "cdens",
    version,
    about = "Local polynomial estimation of conditional CDFs, PDFs, and derivatives, \
             with data-driven bandwidths and robust bias-corrected inference"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit the estimator over a response grid at one conditioning point
    Estimate(EstimateArgs),
    /// Data-driven bandwidth selection over a response grid
    Bandwidth(BandwidthArgs),
    /// Coverage simulation study with built-in data generating processes
    Mc(McArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// CSV file with a header row
    #[arg(long)]
    pub data: String,

    /// Response column name
    #[arg(long, default_value = "y")]
    pub y_col: String,

    /// Comma-separated covariate column names
    #[arg(long, value_delimiter = ',', default_value = "x")]
    pub x_cols: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Conditioning point, one value per covariate
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Vec<f64>,

    /// Explicit response grid values
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y_grid: Option<Vec<f64>>,

    /// Explicit quantile levels for the grid
    #[arg(long, value_delimiter = ',', conflicts_with = "y_grid")]
    pub grid_levels: Option<Vec<f64>>,

    /// Number of quantile-spaced grid points when no grid is given
    #[arg(long, default_value_t = 19, conflicts_with_all = ["y_grid", "grid_levels"])]
    pub grid_count: usize,

    /// Derivative order in the response (0 = CDF, 1 = PDF, ...)
    #[arg(long, default_value_t = 1)]
    pub mu: usize,

    /// Derivative multi-index in the covariates
    #[arg(long, value_delimiter = ',')]
    pub nu: Option<Vec<usize>>,

    /// Response-stage polynomial order
    #[arg(short = 'p', long, default_value_t = 2)]
    pub p: usize,

    /// Covariate-stage polynomial order
    #[arg(short = 'q', long, default_value_t = 1)]
    pub q: usize,

    /// Kernel: epanechnikov, uniform, or triangular
    #[arg(long, default_value = "epanechnikov")]
    pub kernel: String,

    /// One minus the confidence level
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Gaussian draws for the uniform-band critical values
    #[arg(long, default_value_t = 2000)]
    pub band_sims: usize,

    /// Seed for the band simulations
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub model: ModelArgs,

    /// Bandwidth: a number, "mse-rot", or "imse-rot"
    #[arg(long, default_value = "mse-rot")]
    pub bw: String,

    /// Clamp density estimates at zero
    #[arg(long)]
    pub nonneg: bool,

    /// Rescale a density estimate to integrate to one (reserved)
    #[arg(long)]
    pub normalize: bool,

    /// Output format on stdout
    #[arg(long, default_value = "table", value_parser = ["table", "json", "csv"])]
    pub format: String,

    /// Also write an SVG plot to this path
    #[arg(long)]
    pub svg: Option<String>,
}

#[derive(Args, Debug)]
pub struct BandwidthArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub model: ModelArgs,

    /// Selection rule: "mse-rot" or "imse-rot"
    #[arg(long, default_value = "mse-rot", value_parser = ["mse-rot", "imse-rot"])]
    pub bw_type: String,

    /// Output format on stdout
    #[arg(long, default_value = "table", value_parser = ["table", "json", "csv"])]
    pub format: String,
}

#[derive(Args, Debug)]
pub struct McArgs {
    /// Data generating process
    #[arg(long, default_value = "truncated_bivariate_normal",
          value_parser = ["bivariate_normal", "truncated_bivariate_normal"])]
    pub dgp: String,

    /// Marginal variance of the process
    #[arg(long, default_value_t = 2.0)]
    pub variance: f64,

    /// Covariance of the process
    #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
    pub covariance: f64,

    /// Replications per cell
    #[arg(long, default_value_t = 500)]
    pub reps: usize,

    /// Sample size per replication
    #[arg(long, default_value_t = 1000)]
    pub n: usize,

    /// Cells as comma-separated mu:x pairs, e.g. "1:0.0,1:1.0"
    #[arg(long, default_value = "1:0.0", allow_hyphen_values = true)]
    pub cells: String,

    /// Bandwidth multipliers applied to the selected bandwidths
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    pub bw_mult: Vec<f64>,

    /// Evaluation grid size
    #[arg(long, default_value_t = 20)]
    pub grid_size: usize,

    /// Evaluation grid range
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub grid_from: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub grid_to: f64,

    /// One minus the confidence level
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Gaussian draws for the uniform-band critical values
    #[arg(long, default_value_t = 2000)]
    pub band_sims: usize,

    /// Master seed
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Output format
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    pub out: String,

    /// Write to this file instead of stdout
    #[arg(long)]
    pub out_file: Option<String>,
}

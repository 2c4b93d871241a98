use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "rmint", version, about = "Robust marginal integration for additive models")]
pub struct Cli {
    /// Plain-text `key = value` file; flags on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Progress and diagnostics on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an additive model and write component estimates and a manifest.
    Fit(FitArgs),
    /// Predict at new covariates from a fitted model directory.
    Predict(PredictArgs),
    /// Select (h, h_tilde) by K-fold cross-validation.
    Cv(CvArgs),
    /// Asymptotic bias and variance as JSON.
    Theory(TheoryArgs),
    /// Run a Monte Carlo study.
    Simulate(SimulateArgs),
    /// Kernel moments as JSON.
    KernelInfo(KernelInfoArgs),
}

/// Settings shared by `fit` and `cv`.
#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    /// Dataset CSV with columns x1..xd,y[,delta].
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// ls, huber or tukey.
    #[arg(long, default_value = "huber")]
    pub loss: String,
    /// Tuning constant (default 1.345 for huber, 4.685 for tukey).
    #[arg(long)]
    pub c: Option<f64>,
    /// Local polynomial order.
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[arg(long, default_value = "epanechnikov")]
    pub kernel: String,
    /// Kernel on the nuisance directions (default: same as --kernel).
    #[arg(long)]
    pub kernel_nuisance: Option<String>,
    /// Integration measure: uniform or tensor.
    #[arg(long, default_value = "uniform")]
    pub measure: String,
    /// Draws from the uniform measure.
    #[arg(long, default_value_t = 500)]
    pub m: usize,
    /// Cells per axis of the tensor measure.
    #[arg(long, default_value_t = 10)]
    pub per_axis: usize,
    /// Grid range per coordinate as lo:hi[,lo:hi...] (default: data range).
    #[arg(long)]
    pub support: Option<String>,
    #[arg(long, default_value_t = 101)]
    pub grid_points: usize,
    /// Box half-width of the scale's local median, scalar or one per coordinate
    /// (default: 0.1 times each coordinate range).
    #[arg(long, value_delimiter = ',')]
    pub scale_bandwidth: Option<Vec<f64>>,
    /// global or local.
    #[arg(long, default_value = "global")]
    pub scale_mode: String,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Minimum weighted observations per local fit (default q + 2).
    #[arg(long)]
    pub min_support: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub est: EstimatorArgs,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub htilde: Option<f64>,
    /// Fit only this component (1-based); omit for the full additive model.
    #[arg(long)]
    pub alpha: Option<usize>,
    /// Derivative order; requires --alpha when positive.
    #[arg(long, default_value_t = 0)]
    pub nu: usize,
    /// Seed of the uniform integration sample.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest tolerated fraction of non-converged local fits.
    #[arg(long, default_value_t = 0.1)]
    pub max_nonconverged: f64,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Directory written by `fit`, or its manifest file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Covariate CSV with columns x1..xd.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub est: EstimatorArgs,
    /// classical or robust.
    #[arg(long, default_value = "robust")]
    pub cv: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, value_delimiter = ',')]
    pub grid_h: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub grid_htilde: Option<Vec<f64>>,
    /// Step once outward when the minimum sits on the grid boundary.
    #[arg(long)]
    pub extend_grid: bool,
    /// Seeds the fold split and the integration sample.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output JSON (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[arg(long, default_value_t = 0)]
    pub nu: usize,
    #[arg(long, default_value = "epanechnikov")]
    pub kernel: String,
    #[arg(long, default_value = "huber")]
    pub loss: String,
    #[arg(long)]
    pub c: Option<f64>,
    /// Error scale.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Rate constant beta in h = beta n^(-1/(2q+3)).
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Component (1-based).
    #[arg(long, default_value_t = 1)]
    pub alpha: usize,
    /// Evaluation point on the component axis.
    #[arg(long)]
    pub x: Option<f64>,
    /// Value of the (q+1)-th derivative of the component at x.
    #[arg(long, default_value_t = 0.0)]
    pub g_deriv: f64,
    /// Sample size for finite-sample values.
    #[arg(long)]
    pub n: Option<usize>,
    /// Uniform design box lo:hi[,lo:hi...].
    #[arg(long)]
    pub design_box: Option<String>,
    /// Constant response probability, or cos2:a:b:shift:coord.
    #[arg(long, default_value = "1")]
    pub propensity: String,
    /// Precomputed design integral; replaces --design-box.
    #[arg(long)]
    pub design_integral: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario tokens: design (d2|d4), contamination (c0..c3), optional missingness (full|p2).
    pub scenario: Vec<String>,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bandwidth on the component direction (default: 0.1 for d2, 2.11 n^(-1/5) for d4).
    #[arg(long)]
    pub h: Option<f64>,
    /// Nuisance bandwidth (default: 0.1 for d2, 2.11 n^(-0.12) for d4).
    #[arg(long)]
    pub htilde: Option<f64>,
    /// Huber constant of the robust estimator.
    #[arg(long, default_value_t = 1.345)]
    pub c: f64,
    /// Choose bandwidths by cross-validation in every replication.
    #[arg(long)]
    pub cv: bool,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, value_delimiter = ',')]
    pub grid_h: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub grid_htilde: Option<Vec<f64>>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub min_support: Option<usize>,
    /// Trimming levels reported besides mean and median.
    #[arg(long, value_delimiter = ',')]
    pub trims: Option<Vec<f64>>,
    /// Store every component grid and write components.csv.
    #[arg(long)]
    pub components: bool,
    /// Output directory for report.json and summary.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KernelInfoArgs {
    #[arg(long, default_value = "epanechnikov")]
    pub kernel: String,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
}

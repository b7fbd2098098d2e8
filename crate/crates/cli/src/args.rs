use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "gmrf",
    version,
    about = "Pairwise isotropic Gaussian-Markov random field tools"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gibbs-sample a field and write it as a GMRF1 file.
    Simulate(SimulateArgs),
    /// Estimate mu, sigma2 (or Sigma) and beta from a field file.
    Estimate(EstimateArgs),
    /// Closed-form divergences between two field or moments files.
    Kl(KlArgs),
    /// Compare the closed form against a Monte Carlo estimate.
    Validate(ValidateArgs),
}

/// Model parameters. `--mu` and `--sigma` take comma-separated lists,
/// `--sigma` in row-major order.
#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub mu: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma2: Option<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        conflicts_with = "sigma2"
    )]
    pub sigma: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    pub beta: f64,
    /// Site dimension. Inferred from --mu or --sigma when omitted.
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub height: usize,
    #[arg(long)]
    pub width: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Sweeps after burn-in.
    #[arg(long)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run even when |beta| >= 1/8.
    #[arg(long)]
    pub allow_unstable: bool,
    /// Also write every n-th post-burn-in sweep to `<out>.<k>`.
    #[arg(long, requires = "output")]
    pub snapshot_every: Option<usize>,
    /// Output file. Without it the field goes to stdout and the run
    /// summary to stderr.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    pub input: PathBuf,
    /// Expected site dimension; a mismatch is an error.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Known mean to centre about instead of the grand mean.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub mu: Option<Vec<f64>>,
    /// Write the patch moments as a GMRFMOM1 file.
    #[arg(long)]
    pub moments_out: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KlArgs {
    /// Field (GMRF1) or moments (GMRFMOM1) file for p.
    pub p: PathBuf,
    /// Field or moments file for q.
    pub q: PathBuf,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub mu_p: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma2_p: Option<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        conflicts_with = "sigma2_p"
    )]
    pub sigma_p: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta_p: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub mu_q: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma2_q: Option<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        conflicts_with = "sigma2_q"
    )]
    pub sigma_q: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta_q: Option<f64>,
    /// Ridge added to both covariances before factorizing (d > 1).
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub mu_p: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma2_p: Option<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        conflicts_with = "sigma2_p"
    )]
    pub sigma_p: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.05)]
    pub beta_p: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub mu_q: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma2_q: Option<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        conflicts_with = "sigma2_q"
    )]
    pub sigma_q: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.10)]
    pub beta_q: f64,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Maximum accepted relative error.
    #[arg(long, default_value_t = 0.02)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    /// Retained snapshots.
    #[arg(long, default_value_t = 200)]
    pub snapshots: usize,
    /// Sweeps between retained snapshots.
    #[arg(long, default_value_t = 5)]
    pub thin: usize,
    #[arg(long, default_value_t = 200)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub allow_unstable: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

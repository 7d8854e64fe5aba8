use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "apstab",
    version,
    about = "Certify, simulate and analyze almost-periodic delayed networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Derive bounds, maximize the certified rate and write `<name>.certificate.json`.
    Certify,
    /// Integrate the model from its own history and from a seeded random one.
    Simulate,
    /// Check the simulated trajectories against the certificate.
    Analyze,
    /// Run certify, simulate and analyze on three built-in models.
    Demo,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Model description (JSON).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, global = true, default_value = "apstab-out")]
    pub out: PathBuf,

    /// Integration step.
    #[arg(long, global = true, default_value_t = 0.01)]
    pub step: f64,
    /// Integration horizon.
    #[arg(long, global = true, default_value_t = 20.0)]
    pub horizon: f64,
    /// Record every k-th step.
    #[arg(long, global = true, default_value_t = 1)]
    pub stride: usize,
    /// Kernel tail budget per unit activation magnitude.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub tail_tol: f64,
    /// Gauss–Legendre nodes per quadrature panel.
    #[arg(long, global = true, default_value_t = 8)]
    pub nodes: usize,
    /// Seed for the randomized second history.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Integrate even if the standing assumptions fail.
    #[arg(long, global = true)]
    pub allow_unverified: bool,

    /// Bisection tolerance on the decay rate.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub beta_tol: f64,
    /// Pointwise audit runs over [0, audit_horizon].
    #[arg(long, global = true, default_value_t = 100.0)]
    pub audit_horizon: f64,
    #[arg(long, global = true, default_value_t = 4001)]
    pub audit_points: usize,

    /// Start of the decay-fit window.
    #[arg(long, global = true)]
    pub window_start: Option<f64>,
    /// End of the decay-fit window.
    #[arg(long, global = true)]
    pub window_end: Option<f64>,
    /// Distances at or below this are left out of the fit.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub floor: f64,
    /// Required fitted rate as a multiple of the certified one.
    #[arg(long, global = true, default_value_t = 0.9)]
    pub rate_factor: f64,
    #[arg(long, global = true, default_value_t = 0.99)]
    pub min_r2: f64,
    /// Epsilon for the almost-period scan.
    #[arg(long, global = true, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, global = true)]
    pub scan_min: Option<f64>,
    #[arg(long, global = true)]
    pub scan_max: Option<f64>,
    /// Largest admissible trajectory shift defect.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub defect_tol: f64,
    /// Length of the post-transient window for shift defects.
    #[arg(long, global = true, default_value_t = 10.0)]
    pub defect_window: f64,
    /// Largest admissible stationary residual at the final time.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub equilibrium_tol: f64,
}

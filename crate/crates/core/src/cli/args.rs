use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "fpthermo", version, about = "Entropy and free-energy balance of diffusion processes")]
pub struct Cli {
    #[command(subcommand)]
    pub action: Action,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Run directory (default `runs/<command>`, or `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Reuse a non-empty run directory.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Subcommand)]
pub enum Action {
    /// Finite-volume Fokker-Planck run with thermodynamic instrumentation.
    FpRun(RunArgs),
    /// Closed-form Ornstein-Uhlenbeck run.
    OuRun(RunArgs),
    /// Fit the extensive rates against alpha.
    AlphaSweep(RunArgs),
    /// Entropy decomposition of one Markov step.
    Markov(RunArgs),
    /// Orthogonality of the stationary landscape.
    LandscapeCheck(RunArgs),
    /// Euler-Maruyama ensemble.
    Ensemble(RunArgs),
    /// Re-check a finished run directory.
    Report {
        dir: PathBuf,
        #[arg(long)]
        abs_tol: Option<f64>,
        #[arg(long)]
        rel_tol: Option<f64>,
    },
}

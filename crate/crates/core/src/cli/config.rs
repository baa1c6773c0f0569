use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MatrixParam, SystemConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    FpRun,
    OuRun,
    AlphaSweep,
    Markov,
    LandscapeCheck,
    Ensemble,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::FpRun => "fp-run",
            Command::OuRun => "ou-run",
            Command::AlphaSweep => "alpha-sweep",
            Command::Markov => "markov",
            Command::LandscapeCheck => "landscape-check",
            Command::Ensemble => "ensemble",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Command::FpRun,
            Command::OuRun,
            Command::AlphaSweep,
            Command::Markov,
            Command::LandscapeCheck,
            Command::Ensemble,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
    }
}

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_OUTPUT_SPACING: f64 = 0.01;
pub const DEFAULT_ABS_TOL: f64 = 1e-3;
pub const DEFAULT_REL_TOL: f64 = 1e-2;
/// Burn-in before balance checks, in solver steps.
pub const BURN_IN_STEPS: f64 = 10.0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    /// Per-axis `[lower, upper]`.
    pub bounds: Option<Vec<[f64; 2]>>,
    pub cells: Option<Vec<usize>>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub output_spacing: Option<f64>,
    pub burn_in: Option<f64>,
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    Gaussian { mean: Vec<f64>, cov: MatrixParam },
    Dirac { x0: Vec<f64>, eps: Option<f64> },
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteConfig {
    ClosedForm,
    FokkerPlanck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub t_probe: f64,
    pub x0: Vec<f64>,
    pub route: Option<RouteConfig>,
    /// Initial width for the grid route.
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovConfig {
    pub p: Vec<f64>,
    #[serde(rename = "P")]
    pub transition: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderConfig {
    Gradient,
    Linear,
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    pub provider: ProviderConfig,
    /// Explicit evaluation points.
    pub points: Option<Vec<Vec<f64>>>,
    /// Otherwise this many seeded random points ...
    pub n_points: Option<usize>,
    /// ... with radius in `[r_min, r_max]`.
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    /// `|ortho|` bound relative to `|b| |grad phi_ss|`.
    pub rel_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub x0: Vec<f64>,
    pub n_paths: usize,
    pub dt: Option<f64>,
    pub output_times: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
    /// Write one density dump per snapshot (grid runs only).
    #[serde(default)]
    pub dump_densities: bool,
}

/// The file as written by the user.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<Command>,
    seed: Option<u64>,
    system: Option<SystemConfig>,
    #[serde(default)]
    numerics: NumericsConfig,
    initial: Option<InitialConfig>,
    sweep: Option<SweepConfig>,
    markov: Option<MarkovConfig>,
    landscape: Option<LandscapeConfig>,
    ensemble: Option<EnsembleConfig>,
    #[serde(default)]
    output: OutputConfig,
}

/// Fully resolved numerics with defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct Numerics {
    pub bounds: Option<Vec<(f64, f64)>>,
    pub cells: Option<Vec<usize>>,
    pub dt: f64,
    pub t_end: Option<f64>,
    pub output_spacing: f64,
    pub burn_in: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub system: Option<SystemConfig>,
    pub numerics: Numerics,
    pub initial: Option<InitialConfig>,
    pub sweep: Option<SweepConfig>,
    pub markov: Option<MarkovConfig>,
    pub landscape: Option<LandscapeConfig>,
    pub ensemble: Option<EnsembleConfig>,
    pub output: OutputConfig,
}

/// Parse and validate a configuration that names its own command.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_for(text, None)
}

/// Parse and validate. A command given here must agree with the file's.
pub fn parse_config_for(text: &str, command: Option<Command>) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    let command = match (raw.command, command) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Config(format!(
                "config is for `{}` but `{}` was requested",
                a.as_str(),
                b.as_str()
            )))
        }
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => return Err(Error::Config("missing key `command`".into())),
    };
    let n = &raw.numerics;
    let dt = n.dt.unwrap_or(DEFAULT_DT);
    let numerics = Numerics {
        bounds: n.bounds.as_ref().map(|b| b.iter().map(|p| (p[0], p[1])).collect()),
        cells: n.cells.clone(),
        dt,
        t_end: n.t_end,
        output_spacing: n.output_spacing.unwrap_or(DEFAULT_OUTPUT_SPACING),
        burn_in: n.burn_in.unwrap_or(BURN_IN_STEPS * dt),
        abs_tol: n.abs_tol.unwrap_or(DEFAULT_ABS_TOL),
        rel_tol: n.rel_tol.unwrap_or(DEFAULT_REL_TOL),
    };
    for (key, v) in [
        ("numerics.dt", numerics.dt),
        ("numerics.output_spacing", numerics.output_spacing),
        ("numerics.abs_tol", numerics.abs_tol),
        ("numerics.rel_tol", numerics.rel_tol),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Config(format!("`{key}` must be positive")));
        }
    }
    if !(numerics.burn_in >= 0.0) {
        return Err(Error::Config("`numerics.burn_in` must be non-negative".into()));
    }
    let cfg = RunConfig {
        command,
        seed: raw.seed.unwrap_or(0),
        system: raw.system,
        numerics,
        initial: raw.initial,
        sweep: raw.sweep,
        markov: raw.markov,
        landscape: raw.landscape,
        ensemble: raw.ensemble,
        output: raw.output,
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn need<T>(v: &Option<T>, key: &str, cmd: Command) -> Result<()> {
    if v.is_none() {
        return Err(Error::Config(format!("`{}` needs `{key}`", cmd.as_str())));
    }
    Ok(())
}

fn validate(cfg: &RunConfig) -> Result<()> {
    let cmd = cfg.command;
    let n = &cfg.numerics;
    let grid_keys = || -> Result<()> {
        need(&n.bounds, "numerics.bounds", cmd)?;
        need(&n.cells, "numerics.cells", cmd)
    };
    let t_end = || -> Result<()> {
        need(&n.t_end, "numerics.t_end", cmd)?;
        let t = n.t_end.unwrap_or(0.0);
        if !(t > 0.0) || t < 2.0 * n.output_spacing {
            return Err(Error::Config(
                "`numerics.t_end` must cover at least two output intervals".into(),
            ));
        }
        Ok(())
    };
    match cmd {
        Command::FpRun => {
            need(&cfg.system, "system", cmd)?;
            need(&cfg.initial, "initial", cmd)?;
            grid_keys()?;
            t_end()?;
        }
        Command::OuRun => {
            need(&cfg.system, "system", cmd)?;
            need(&cfg.initial, "initial", cmd)?;
            t_end()?;
            if cfg.initial == Some(InitialConfig::Uniform) {
                return Err(Error::Config("`ou-run` needs a Gaussian or Dirac initial law".into()));
            }
        }
        Command::AlphaSweep => {
            need(&cfg.system, "system", cmd)?;
            need(&cfg.sweep, "sweep", cmd)?;
            let s = cfg.sweep.as_ref().expect("checked");
            if s.alphas.len() < crate::asympt::MIN_SWEEP_POINTS {
                return Err(Error::Config(format!(
                    "`sweep.alphas` has {} values; ≥ {} required",
                    s.alphas.len(),
                    crate::asympt::MIN_SWEEP_POINTS
                )));
            }
            if s.route == Some(RouteConfig::FokkerPlanck) {
                grid_keys()?;
            }
        }
        Command::Markov => need(&cfg.markov, "markov", cmd)?,
        Command::LandscapeCheck => {
            need(&cfg.system, "system", cmd)?;
            need(&cfg.landscape, "landscape", cmd)?;
            let l = cfg.landscape.as_ref().expect("checked");
            if l.points.is_none() && l.n_points.is_none() {
                return Err(Error::Config("`landscape` needs `points` or `n_points`".into()));
            }
            if l.provider == ProviderConfig::Grid {
                grid_keys()?;
            }
        }
        Command::Ensemble => {
            need(&cfg.system, "system", cmd)?;
            need(&cfg.ensemble, "ensemble", cmd)?;
        }
    }
    Ok(())
}

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{
    Command, InitialConfig, LandscapeConfig, ProviderConfig, RouteConfig, RunConfig,
};
use crate::asympt::{
    alpha_sweep, landscape_check, ode_flow, simulate_ensemble, EnsembleOptions, FpSweepOptions,
    PhiSsProvider, SweepRoute,
};
use crate::error::{Error, Result};
use crate::fpsolve::{
    init_density, make_grid, stationary_density, uniform_times, write_dump, FpSolver,
    InitialCondition, SolverOptions,
};
use crate::markov::{decomposition_check, MarkovChain};
use crate::model::{build_system, SystemSpec};
use crate::ougauss::{ou_rates, propagate, propagate_from_point, GaussianState, OuSpec};
use crate::thermo::{instrument, records_from_states, ThermoRecord, ThermoState};

pub const THERMO_HEADER: &str = "t,S,ep,qex,F,qhk,dSdt_fd,dFdt_fd,res_entropy,res_freeenergy";
pub const SWEEP_HEADER: &str = "alpha,ep,qex,sum,predicted_slope";
/// Relative slope tolerance recorded for sweep reports.
pub const SWEEP_SLOPE_TOL: f64 = 0.02;
/// Orthogonality bound relative to `|b| |grad phi_ss|` for the grid provider.
pub const GRID_LANDSCAPE_REL_TOL: f64 = 0.02;
/// Absolute orthogonality slack for analytic providers.
pub const LANDSCAPE_ABS_TOL: f64 = 1e-10;
/// Standard errors allowed between ensemble statistics and references.
pub const ENSEMBLE_SE_FACTOR: f64 = 4.0;

/// `{:.16e}`: 17 significant digits, enough to round-trip.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_row(values: &[f64]) -> String {
    values.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(",")
}

/// Files produced by a run, written only after every computation succeeded.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, String)>,
    manifest: Vec<(String, String)>,
    /// Lines echoed to standard output.
    pub summary: Vec<String>,
}

impl Artifacts {
    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn meta(&mut self, key: &str, value: impl ToString) {
        self.manifest.push((key.to_string(), value.to_string()));
    }

    pub fn file_names(&self) -> Vec<&str> {
        self.files.iter().map(|f| f.0.as_str()).collect()
    }
}

/// Refuse to reuse a non-empty directory unless `overwrite` is set.
fn prepare_dir(dir: &Path, overwrite: bool) -> Result<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        if entries.next().is_some() && !overwrite {
            return Err(Error::io(
                dir,
                std::io::Error::new(
                    std::io::ErrorKind::AlreadyExists,
                    "run directory exists and is not empty (pass --overwrite to replace it)",
                ),
            ));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Execute a run and write its directory.
pub fn run(cfg: &RunConfig, config_text: &str, dir: &Path, overwrite: bool) -> Result<Artifacts> {
    let start = Instant::now();
    let mut art = Artifacts::default();
    art.meta("tool", env!("CARGO_PKG_NAME"));
    art.meta("version", env!("CARGO_PKG_VERSION"));
    art.meta("command", cfg.command.as_str());
    art.meta("seed", cfg.seed);
    art.meta("config", "config.toml");
    prepare_dir(dir, overwrite)?;
    match cfg.command {
        Command::FpRun => fp_run(cfg, dir, &mut art)?,
        Command::OuRun => ou_run(cfg, &mut art)?,
        Command::AlphaSweep => sweep_run(cfg, &mut art)?,
        Command::Markov => markov_run(cfg, &mut art)?,
        Command::LandscapeCheck => landscape_run(cfg, &mut art)?,
        Command::Ensemble => ensemble_run(cfg, &mut art)?,
    }
    art.meta("outputs", art.file_names().join(","));
    art.meta("wall_time_s", format!("{:.3}", start.elapsed().as_secs_f64()));
    let write = |name: &str, contents: &str| {
        let p = dir.join(name);
        fs::write(&p, contents).map_err(|e| Error::io(p, e))
    };
    write("config.toml", config_text)?;
    for (name, contents) in &art.files {
        write(name, contents)?;
    }
    let mut manifest = String::new();
    for (k, v) in &art.manifest {
        let _ = writeln!(manifest, "{k}={v}");
    }
    write("manifest.txt", &manifest)?;
    Ok(art)
}

fn system(cfg: &RunConfig) -> Result<SystemSpec> {
    build_system(cfg.system.as_ref().expect("validated"))
}

fn initial_condition(init: &InitialConfig) -> Result<InitialCondition> {
    Ok(match init {
        InitialConfig::Gaussian { mean, cov } => InitialCondition::Gaussian {
            mean: mean.clone(),
            cov: cov.to_matrix()?,
        },
        InitialConfig::Dirac { x0, eps } => InitialCondition::Dirac {
            x0: x0.clone(),
            eps: *eps,
        },
        InitialConfig::Uniform => InitialCondition::Uniform,
    })
}

fn balance_meta(cfg: &RunConfig, art: &mut Artifacts) {
    art.meta("abs_tol", fmt_num(cfg.numerics.abs_tol));
    art.meta("rel_tol", fmt_num(cfg.numerics.rel_tol));
    art.meta("burn_in", fmt_num(cfg.numerics.burn_in));
}

pub fn thermo_csv(records: &[ThermoRecord]) -> String {
    let mut out = format!("{THERMO_HEADER}\n");
    for r in records {
        out += &csv_row(&[
            r.t,
            r.entropy,
            r.ep,
            r.qex,
            r.free_energy,
            r.qhk,
            r.dsdt_fd,
            r.dfdt_fd,
            r.res_entropy,
            r.res_freeenergy,
        ]);
        out.push('\n');
    }
    out
}

fn fp_run(cfg: &RunConfig, dir: &Path, art: &mut Artifacts) -> Result<()> {
    let n = &cfg.numerics;
    let spec = system(cfg)?;
    let grid = make_grid(n.bounds.as_ref().expect("validated"), n.cells.as_ref().expect("validated"))?;
    let f0 = init_density(&grid, &initial_condition(cfg.initial.as_ref().expect("validated"))?)?;
    let stationary = stationary_density(&spec, &grid)?;
    let mut solver = FpSolver::new(
        &spec,
        &grid,
        SolverOptions {
            dt: n.dt,
            ..Default::default()
        },
    )?;
    let t_end = n.t_end.expect("validated");
    let times = uniform_times(t_end, n.output_spacing, true);
    let snaps = solver.solve(&f0, t_end, &times)?;
    let records = instrument(&spec, &snaps, &stationary)?;
    art.file("thermo.csv", thermo_csv(&records));
    balance_meta(cfg, art);
    art.meta("dt", fmt_num(n.dt));
    art.meta("grid", grid.cells().iter().map(|c| c.to_string()).collect::<Vec<_>>().join("x"));
    if cfg.output.dump_densities {
        let dumps = dir.join("densities");
        fs::create_dir_all(&dumps).map_err(|e| Error::io(&dumps, e))?;
        for (k, f) in snaps.iter().enumerate() {
            write_dump(&dumps.join(format!("density_{k:05}.txt")), f)?;
        }
    }
    art.summary.push(format!("fp-run: {} records", records.len()));
    Ok(())
}

fn ou_run(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let n = &cfg.numerics;
    let spec = system(cfg)?;
    let ou = OuSpec::from_system(&spec)?;
    let state0 = match cfg.initial.as_ref().expect("validated") {
        InitialConfig::Gaussian { mean, cov } => {
            GaussianState::new(DVector::from_vec(mean.clone()), cov.to_matrix()?)?
        }
        InitialConfig::Dirac { x0, eps } => {
            let eps = eps.ok_or_else(|| {
                Error::Config("`ou-run` with a Dirac start needs `initial.eps`".into())
            })?;
            let d = x0.len();
            GaussianState::new(DVector::from_vec(x0.clone()), DMatrix::identity(d, d) * eps)?
        }
        InitialConfig::Uniform => unreachable!("rejected by validation"),
    };
    let t_end = n.t_end.expect("validated");
    let times = uniform_times(t_end, n.output_spacing, true);
    let states = times
        .iter()
        .map(|&t| {
            let st = propagate(&ou, &state0, t)?;
            let r = ou_rates(&ou, &st);
            let (free_energy, qhk) = match (r.free_energy, r.qhk) {
                (Some(f), Some(q)) => (f, q),
                _ => return Err(Error::NotHurwitz { max_re: ou.max_real_eigenvalue() }),
            };
            Ok(ThermoState {
                entropy: r.entropy,
                ep: r.ep,
                qex: r.qex,
                free_energy,
                qhk,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let records = records_from_states(&times, &states)?;
    art.file("thermo.csv", thermo_csv(&records));
    balance_meta(cfg, art);
    art.summary.push(format!("ou-run: {} records", records.len()));
    Ok(())
}

fn sweep_run(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let s = cfg.sweep.as_ref().expect("validated");
    let spec = system(cfg)?;
    let route = match s.route {
        Some(RouteConfig::ClosedForm) => SweepRoute::ClosedForm,
        None if spec.linear().is_some() && spec.constant_diffusion().is_some() => SweepRoute::ClosedForm,
        _ => {
            let n = &cfg.numerics;
            SweepRoute::FokkerPlanck(FpSweepOptions {
                bounds: n
                    .bounds
                    .clone()
                    .ok_or_else(|| Error::Config("grid sweep needs `numerics.bounds`".into()))?,
                cells: n
                    .cells
                    .clone()
                    .ok_or_else(|| Error::Config("grid sweep needs `numerics.cells`".into()))?,
                dt: n.dt,
                eps: s.eps,
            })
        }
    };
    let r = alpha_sweep(&spec, &s.alphas, s.t_probe, &s.x0, &route)?;
    let mut csv = format!("{SWEEP_HEADER}\n");
    for k in 0..r.alphas.len() {
        csv += &csv_row(&[
            r.alphas[k],
            r.ep_values[k],
            r.qex_values[k],
            r.ep_values[k] + r.qex_values[k],
            r.predicted_slope,
        ]);
        csv.push('\n');
    }
    art.file("sweep.csv", csv);
    let mut fit = String::new();
    let route_name = match route {
        SweepRoute::ClosedForm => "closed-form",
        SweepRoute::FokkerPlanck(_) => "fokker-planck",
    };
    let _ = writeln!(fit, "route={route_name}");
    let _ = writeln!(fit, "t_probe={}", fmt_num(r.t_probe));
    let _ = writeln!(
        fit,
        "xhat={}",
        r.xhat.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(fit, "predicted_slope={}", fmt_num(r.predicted_slope));
    for (name, f) in [("ep", &r.ep_fit), ("qex", &r.qex_fit), ("sum", &r.sum_fit)] {
        let _ = writeln!(fit, "{name}_slope={}", fmt_num(f.slope));
        let _ = writeln!(fit, "{name}_slope_se={}", fmt_num(f.slope_se));
        let _ = writeln!(fit, "{name}_intercept={}", fmt_num(f.intercept));
        let _ = writeln!(fit, "{name}_intercept_se={}", fmt_num(f.intercept_se));
        let _ = writeln!(fit, "{name}_residual_rms={}", fmt_num(f.residual_rms));
    }
    let _ = writeln!(fit, "cancellation={}", r.cancellation_holds());
    art.file("fit.txt", fit);
    art.meta("slope_tol", fmt_num(SWEEP_SLOPE_TOL));
    art.summary.push(format!(
        "alpha-sweep: ep_slope {:.6e}, qex_slope {:.6e}, predicted {:.6e}, sum_slope {:.3e} +- {:.3e}",
        r.ep_fit.slope, r.qex_fit.slope, r.predicted_slope, r.sum_fit.slope, r.sum_fit.slope_se
    ));
    Ok(())
}

pub fn markov_line(cfg: &RunConfig) -> Result<String> {
    let m = cfg.markov.as_ref().expect("validated");
    let chain = MarkovChain::new(m.p.clone(), m.transition.clone())?;
    let d = decomposition_check(&chain);
    Ok(format!(
        "generated={} change={} folding={} residual={}",
        fmt_num(d.generated),
        fmt_num(d.change),
        fmt_num(d.folding),
        fmt_num(d.residual)
    ))
}

fn markov_run(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let line = markov_line(cfg)?;
    art.file("markov.txt", format!("{line}\n"));
    art.summary.push(line);
    Ok(())
}

fn landscape_points(l: &LandscapeConfig, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    if let Some(p) = &l.points {
        return p.clone();
    }
    let n = l.n_points.unwrap_or(0);
    let (r0, r1) = (l.r_min.unwrap_or(0.0), l.r_max.unwrap_or(1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = r0 + (r1 - r0) * rng.random::<f64>();
            if dim == 1 {
                vec![if rng.random::<bool>() { r } else { -r }]
            } else {
                let th = std::f64::consts::TAU * rng.random::<f64>();
                vec![r * th.cos(), r * th.sin()]
            }
        })
        .collect()
}

fn landscape_run(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let l = cfg.landscape.as_ref().expect("validated");
    let spec = system(cfg)?;
    let (provider, default_rel) = match l.provider {
        ProviderConfig::Gradient => (PhiSsProvider::GradientAnalytic, 0.0),
        ProviderConfig::Linear => (PhiSsProvider::LinearLyapunov, 0.0),
        ProviderConfig::Grid => (
            PhiSsProvider::GridNumeric {
                bounds: cfg.numerics.bounds.clone().expect("validated"),
                cells: cfg.numerics.cells.clone().expect("validated"),
            },
            GRID_LANDSCAPE_REL_TOL,
        ),
    };
    let rel = l.rel_tol.unwrap_or(default_rel);
    let points = landscape_points(l, spec.dim(), cfg.seed);
    let checks = landscape_check(&spec, &provider, &points)?;
    let dim = spec.dim();
    let axes: Vec<String> = (1..=dim).map(|a| a.to_string()).collect();
    let mut header: Vec<String> = Vec::new();
    for prefix in ["x", "grad", "gamma"] {
        header.extend(axes.iter().map(|a| format!("{prefix}{a}")));
    }
    header.extend(
        ["ortho", "norm_dgrad", "norm_gamma", "norm_b", "pythagorean_residual", "ortho_bound"]
            .iter()
            .map(|s| s.to_string()),
    );
    let mut csv = header.join(",") + "\n";
    let mut worst: f64 = 0.0;
    for c in &checks {
        let b = DVector::from_column_slice(&c.drift).norm();
        let g = DVector::from_column_slice(&c.phi_ss_grad).norm();
        let bound = LANDSCAPE_ABS_TOL + rel * b * g;
        worst = worst.max(c.ortho.abs() / bound);
        let mut row = c.x.clone();
        row.extend(&c.phi_ss_grad);
        row.extend(&c.gamma);
        row.extend([c.ortho, c.norms[0], c.norms[1], c.norms[2], c.pythagorean_residual(), bound]);
        csv += &csv_row(&row);
        csv.push('\n');
    }
    art.file("landscape.csv", csv);
    art.meta("landscape_rel_tol", fmt_num(rel));
    art.summary.push(format!(
        "landscape-check: {} points, worst |ortho| / bound = {worst:.3e}",
        checks.len()
    ));
    Ok(())
}

fn ensemble_run(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let e = cfg.ensemble.as_ref().expect("validated");
    let spec = system(cfg)?;
    let dt = e.dt.unwrap_or(cfg.numerics.dt);
    let opts = EnsembleOptions::new(e.n_paths, dt, e.output_times.clone(), cfg.seed);
    let snaps = simulate_ensemble(&spec, &e.x0, &opts)?;
    let mut grid = vec![0.0];
    grid.extend(&e.output_times);
    let flow = ode_flow(&spec, &e.x0, &grid)?;
    let ou = OuSpec::from_system(&spec).ok();
    let n = spec.dim();
    let mut header = vec!["t".to_string()];
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    for a in 1..=n {
        header.push(format!("mean{a}"));
        header.push(format!("mean_se{a}"));
        header.push(format!("xhat{a}"));
    }
    for &(i, j) in &pairs {
        header.push(format!("cov{}{}", i + 1, j + 1));
        header.push(format!("cov_se{}{}", i + 1, j + 1));
        if ou.is_some() {
            header.push(format!("ref_cov{}{}", i + 1, j + 1));
        }
    }
    let mut csv = header.join(",") + "\n";
    let x0 = DVector::from_column_slice(&e.x0);
    for (s, p) in snaps.iter().zip(&flow[1..]) {
        let mut row = vec![s.t];
        for a in 0..n {
            row.extend([s.mean[a], s.mean_se[a], p.xhat[a]]);
        }
        let reference = ou
            .as_ref()
            .map(|ou| propagate_from_point(ou, &x0, s.t).map(|g| g.cov().clone()))
            .transpose()?;
        for &(i, j) in &pairs {
            row.extend([s.cov[(i, j)], s.cov_se[(i, j)]]);
            if let Some(c) = &reference {
                row.push(c[(i, j)]);
            }
        }
        csv += &csv_row(&row);
        csv.push('\n');
    }
    art.file("ensemble.csv", csv);
    art.meta("n_paths", e.n_paths);
    art.meta("dt", fmt_num(dt));
    art.meta("se_factor", fmt_num(ENSEMBLE_SE_FACTOR));
    art.summary.push(format!("ensemble: {} paths, {} output times", e.n_paths, snaps.len()));
    Ok(())
}

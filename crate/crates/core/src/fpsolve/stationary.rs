use super::solver::shifted_operator;
use super::{DensityField, Discretization, Grid};
use crate::error::{Error, Result};
use crate::model::SystemSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StationaryMethod {
    /// Null vector of the discrete generator: zero-flux construction when the
    /// flux can vanish face by face, shifted inverse iteration otherwise.
    NullSpace,
    /// Implicit-Euler relaxation until the residual is small.
    LongTime,
}

#[derive(Clone, Debug)]
pub struct StationarySolution {
    pub density: DensityField,
    /// `ln pi` per cell, finite everywhere even where `pi` underflows.
    pub log_density: Vec<f64>,
    /// `K_alpha = sum_cells exp(-alpha U) vol` for gradient systems.
    pub normalization: Option<f64>,
    pub method: StationaryMethod,
    /// `max |L pi| / max pi`.
    pub residual: f64,
}

/// Residual bound for an accepted stationary solution.
pub const STATIONARY_RESIDUAL: f64 = 1e-8;
/// Boundary-layer mass allowed for the Gibbs density of a gradient system.
pub const GIBBS_BOUNDARY_MASS: f64 = 1e-10;

pub fn stationary_density(spec: &SystemSpec, grid: &Grid) -> Result<StationarySolution> {
    let disc = Discretization::new(spec, grid)?;
    let alpha = spec.alpha();
    let (log_density, normalization) = if let Some(u) = spec.potential() {
        let s: Vec<f64> = grid.centers().iter().map(|x| -alpha * u.eval(x)).collect();
        let log_k = log_sum_exp(&s) + grid.cell_volume().ln();
        let log_pi = s.iter().map(|v| v - log_k).collect();
        (log_pi, Some(log_k.exp()))
    } else if grid.dim() == 1 {
        // Zero flux through every face: ln f_r = ln f_l + w.
        let mut s = vec![0.0; grid.len()];
        for face in disc.faces() {
            s[face.right] = s[face.left] + face.peclet;
        }
        let log_k = log_sum_exp(&s) + grid.cell_volume().ln();
        (s.iter().map(|v| v - log_k).collect(), None)
    } else {
        let values = inverse_iteration(&disc)?;
        let logs = values.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
        (logs, None)
    };
    finish(&disc, log_density, normalization, StationaryMethod::NullSpace, spec.potential().is_some())
}

/// Stationary density by relaxing from the uniform state.
pub fn stationary_density_long_time(
    spec: &SystemSpec,
    grid: &Grid,
    dt: f64,
    max_time: f64,
) -> Result<StationarySolution> {
    let disc = Discretization::new(spec, grid)?;
    let lu = shifted_operator(&disc, dt).factor()?;
    let mut f = vec![1.0 / (grid.len() as f64 * grid.cell_volume()); grid.len()];
    let mut t = 0.0;
    let mut residual = f64::INFINITY;
    while t < max_time {
        lu.solve_in_place(&mut f);
        t += dt;
        residual = relative_residual(&disc, &f);
        if residual <= 0.1 * STATIONARY_RESIDUAL {
            break;
        }
    }
    if residual > STATIONARY_RESIDUAL {
        return Err(Error::NoConvergence { residual });
    }
    let logs = f.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    finish(&disc, logs, None, StationaryMethod::LongTime, spec.potential().is_some())
}

fn finish(
    disc: &Discretization,
    log_density: Vec<f64>,
    normalization: Option<f64>,
    method: StationaryMethod,
    gradient: bool,
) -> Result<StationarySolution> {
    let grid = disc.grid();
    let values: Vec<f64> = log_density.iter().map(|v| v.exp()).collect();
    let density = DensityField::from_values(grid.clone(), values, 0.0)?;
    // re-derive logs from the normalized values where representable
    let shift = density.mass().ln();
    let log_density: Vec<f64> = log_density.iter().map(|v| v - shift).collect();
    let residual = relative_residual(disc, density.values());
    if residual > STATIONARY_RESIDUAL {
        return Err(Error::NoConvergence { residual });
    }
    let edge = density.boundary_mass();
    let limit = if gradient { GIBBS_BOUNDARY_MASS } else { 1e-8 };
    if edge >= limit {
        return Err(Error::DomainTooSmall(format!(
            "stationary density puts {edge:.3e} of its mass on the boundary cells"
        )));
    }
    Ok(StationarySolution {
        density,
        log_density,
        normalization,
        method,
        residual,
    })
}

fn relative_residual(disc: &Discretization, f: &[f64]) -> f64 {
    let r = disc.apply(f);
    let max_r = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_f = f.iter().fold(0.0f64, |m, v| m.max(*v));
    max_r / max_f
}

/// Null vector of `L` by inverse iteration on `I - tau L`.
fn inverse_iteration(disc: &Discretization) -> Result<Vec<f64>> {
    let grid = disc.grid();
    let tau = 1e4;
    let lu = shifted_operator(disc, tau).factor()?;
    let vol = grid.cell_volume();
    let mut f = vec![1.0; grid.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..100 {
        lu.solve_in_place(&mut f);
        let mass: f64 = f.iter().sum::<f64>() * vol;
        f.iter_mut().for_each(|v| *v /= mass);
        residual = relative_residual(disc, &f);
        if residual <= 1e-3 * STATIONARY_RESIDUAL {
            return Ok(f);
        }
    }
    if residual <= STATIONARY_RESIDUAL {
        Ok(f)
    } else {
        Err(Error::NoConvergence { residual })
    }
}

fn log_sum_exp(s: &[f64]) -> f64 {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

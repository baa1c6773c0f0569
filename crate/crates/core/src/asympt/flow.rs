use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fpsolve::DensityField;
use crate::model::SystemSpec;
use crate::ougauss::{sigma_at, OuSpec};

/// One sample of the deterministic path `dx/dt = b(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowPoint {
    pub t: f64,
    pub xhat: DVector<f64>,
    pub div_b: f64,
    pub jac_b: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowOptions {
    /// Largest RK4 step.
    pub max_step: f64,
    /// The path is declared blown up once `|x| > escape_radius`.
    pub escape_radius: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            max_step: 1e-3,
            escape_radius: 1e6,
        }
    }
}

fn check_time_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.first() != Some(&0.0) {
        return Err(Error::InvalidInput("time grid must start at 0".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] >= w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("time grid must be sorted and finite".into()));
    }
    Ok(())
}

fn substeps(span: f64, max_step: f64) -> (usize, f64) {
    if span == 0.0 {
        return (0, 0.0);
    }
    let n = (span / max_step - 1e-9).ceil().max(1.0) as usize;
    (n, span / n as f64)
}

fn flow_point(spec: &SystemSpec, t: f64, x: &DVector<f64>) -> FlowPoint {
    FlowPoint {
        t,
        xhat: x.clone(),
        div_b: spec.drift_divergence(x.as_slice()),
        jac_b: spec.drift_jacobian(x.as_slice()),
    }
}

fn drift(spec: &SystemSpec, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(spec.drift(x.as_slice()))
}

fn escaped(x: &DVector<f64>, radius: f64) -> bool {
    !x.iter().all(|v| v.is_finite()) || x.norm() > radius
}

pub fn ode_flow(spec: &SystemSpec, x0: &[f64], t_grid: &[f64]) -> Result<Vec<FlowPoint>> {
    ode_flow_with(spec, x0, t_grid, FlowOptions::default())
}

/// Classical RK4 integration of `dx/dt = b(x)`, sampled at `t_grid`.
pub fn ode_flow_with(
    spec: &SystemSpec,
    x0: &[f64],
    t_grid: &[f64],
    opts: FlowOptions,
) -> Result<Vec<FlowPoint>> {
    check_time_grid(t_grid)?;
    if x0.len() != spec.dim() {
        return Err(Error::InvalidInput("initial point has the wrong dimension".into()));
    }
    let mut x = DVector::from_column_slice(x0);
    let mut out = vec![flow_point(spec, 0.0, &x)];
    for w in t_grid.windows(2) {
        let (n, h) = substeps(w[1] - w[0], opts.max_step);
        for k in 0..n {
            let k1 = drift(spec, &x);
            let k2 = drift(spec, &(&x + &k1 * (0.5 * h)));
            let k3 = drift(spec, &(&x + &k2 * (0.5 * h)));
            let k4 = drift(spec, &(&x + &k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            if escaped(&x, opts.escape_radius) {
                return Err(Error::BlowUp { t: w[0] + h * (k + 1) as f64 });
            }
        }
        out.push(flow_point(spec, w[1], &x));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HessianSource {
    EmpiricalCovariance,
    LyapunovOde,
    OuExact,
}

/// `Sigma` and its inverse, the Hessian of the rate function at `xhat(t)`.
/// `Sigma` is alpha-free: the density covariance is `Sigma / alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFunctionEstimate {
    pub t: f64,
    pub hessian: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub source: HessianSource,
}

impl RateFunctionEstimate {
    pub fn from_sigma(t: f64, sigma: DMatrix<f64>, source: HessianSource) -> Result<Self> {
        let sigma = symmetrize(&sigma);
        let chol = sigma.clone().cholesky().ok_or_else(|| match source {
            HessianSource::EmpiricalCovariance => {
                Error::Regime("empirical covariance is not positive definite".into())
            }
            _ => Error::NotSpd { at: vec![] },
        })?;
        Ok(RateFunctionEstimate {
            t,
            hessian: symmetrize(&chol.inverse()),
            sigma,
            source,
        })
    }

    /// Exact OU value, `sigma0 = None` meaning a point-mass start.
    pub fn from_ou(ou: &OuSpec, sigma0: Option<&DMatrix<f64>>, t: f64) -> Result<Self> {
        Self::from_sigma(t, sigma_at(ou, sigma0, t)?, HessianSource::OuExact)
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// RK4 of `x' = b(x)` jointly with `Sigma' = 2 D(x) + J Sigma + Sigma J^T`,
/// sampled at the times of `flow`, starting from `flow[0].xhat`.
pub fn propagate_fluctuations(
    spec: &SystemSpec,
    flow: &[FlowPoint],
    sigma0: &DMatrix<f64>,
) -> Result<Vec<RateFunctionEstimate>> {
    let n = spec.dim();
    let first = flow
        .first()
        .ok_or_else(|| Error::InvalidInput("empty flow".into()))?;
    if sigma0.nrows() != n || sigma0.ncols() != n {
        return Err(Error::InvalidInput("sigma0 has the wrong shape".into()));
    }
    let times: Vec<f64> = flow.iter().map(|p| p.t).collect();
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidInput("flow times must be sorted".into()));
    }
    let rhs = |x: &DVector<f64>, s: &DMatrix<f64>| {
        let j = spec.drift_jacobian(x.as_slice());
        let ds = spec.diffusion(x.as_slice()) * 2.0 + &j * s + s * j.transpose();
        (drift(spec, x), ds)
    };
    let opts = FlowOptions::default();
    let mut x = first.xhat.clone();
    let mut s = sigma0.clone();
    let mut out = vec![RateFunctionEstimate::from_sigma(first.t, s.clone(), HessianSource::LyapunovOde)?];
    for w in times.windows(2) {
        let (steps, h) = substeps(w[1] - w[0], opts.max_step);
        for _ in 0..steps {
            let (kx1, ks1) = rhs(&x, &s);
            let (kx2, ks2) = rhs(&(&x + &kx1 * (0.5 * h)), &(&s + &ks1 * (0.5 * h)));
            let (kx3, ks3) = rhs(&(&x + &kx2 * (0.5 * h)), &(&s + &ks2 * (0.5 * h)));
            let (kx4, ks4) = rhs(&(&x + &kx3 * h), &(&s + &ks3 * h));
            x += (kx1 + kx2 * 2.0 + kx3 * 2.0 + kx4) * (h / 6.0);
            s += (ks1 + ks2 * 2.0 + ks3 * 2.0 + ks4) * (h / 6.0);
            s = symmetrize(&s);
        }
        if escaped(&x, opts.escape_radius) || !s.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { t: w[1] });
        }
        out.push(RateFunctionEstimate::from_sigma(w[1], s.clone(), HessianSource::LyapunovOde)?);
    }
    Ok(out)
}

/// Fraction of the peak below which local maxima are ignored.
const MODE_THRESHOLD: f64 = 1e-3;
/// Largest boundary-layer mass accepted for a local-Gaussian estimate.
const MAX_EDGE_MASS: f64 = 1e-3;

/// Number of significant local maxima over the full neighborhood (diagonals
/// included). Ties are broken by cell index so a flat top counts once.
pub fn count_modes(density: &DensityField) -> usize {
    let g = density.grid();
    let v = density.values();
    let cut = MODE_THRESHOLD * density.max();
    let cells = g.cells();
    let dim = g.dim();
    let above = |a: usize, b: usize| v[a] > v[b] || (v[a] == v[b] && a > b);
    (0..g.len())
        .filter(|&k| v[k] >= cut && v[k] > 0.0)
        .filter(|&k| {
            let i = g.unravel(k);
            (0..3usize.pow(dim as u32)).all(|code| {
                let mut j = [0usize; 2];
                let mut c = code;
                for axis in 0..dim {
                    let off = (c % 3) as isize - 1;
                    c /= 3;
                    let n = i[axis] as isize + off;
                    if n < 0 || n >= cells[axis] as isize {
                        return true;
                    }
                    j[axis] = n as usize;
                }
                let other = g.ravel(j);
                other == k || above(k, other)
            })
        })
        .count()
}

/// `Sigma = alpha Cov[f]`, valid when the density is a single Gaussian-like
/// bump.
pub fn estimate_hessian_from_density(
    density: &DensityField,
    alpha: f64,
) -> Result<RateFunctionEstimate> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput("alpha must be positive".into()));
    }
    let edge = density.boundary_mass();
    if edge > MAX_EDGE_MASS {
        return Err(Error::Regime(format!(
            "{edge:.3e} of the mass sits on the boundary cells"
        )));
    }
    let modes = count_modes(density);
    if modes != 1 {
        return Err(Error::Regime(format!("density has {modes} modes")));
    }
    RateFunctionEstimate::from_sigma(
        density.time(),
        density.covariance() * alpha,
        HessianSource::EmpiricalCovariance,
    )
}

/// The two leading terms of the entropy rate for large alpha.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MacroBalance {
    /// `div b(xhat)`.
    pub local_heat: f64,
    /// `D(xhat) : Hess phi`.
    pub local_ep: f64,
    pub total: f64,
}

pub fn macroscopic_entropy_balance(
    spec: &SystemSpec,
    point: &FlowPoint,
    rfe: &RateFunctionEstimate,
) -> Result<MacroBalance> {
    if (point.t - rfe.t).abs() > 1e-9 * point.t.abs().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "flow point at t = {} paired with estimate at t = {}",
            point.t, rfe.t
        )));
    }
    let d = spec.diffusion(point.xhat.as_slice());
    let local_ep = d.component_mul(&rfe.hessian).sum();
    Ok(MacroBalance {
        local_heat: point.div_b,
        local_ep,
        total: point.div_b + local_ep,
    })
}

use nalgebra::{DMatrix, DVector};

use super::flow::FlowPoint;
use crate::error::{Error, Result};
use crate::fpsolve::{make_grid, stationary_density, Grid};
use crate::model::{Poly, SystemSpec};
use crate::ougauss::{stationary_covariance, OuSpec};

/// Where the stationary rate function `phi_ss` comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum PhiSsProvider {
    /// `phi_ss = U` for systems with a potential.
    GradientAnalytic,
    /// `phi_ss = 1/2 x . Sigma_ss^-1 x` for Hurwitz linear drift.
    LinearLyapunov,
    /// `phi_ss = -(1/alpha) ln pi` from the grid stationary density.
    GridNumeric {
        bounds: Vec<(f64, f64)>,
        cells: Vec<usize>,
    },
}

/// A resolved `phi_ss`, defined up to an additive constant.
#[derive(Clone, Debug)]
pub enum PhiSs {
    Potential(Poly),
    Quadratic(DMatrix<f64>),
    Grid(GridPhi),
}

impl PhiSs {
    pub fn resolve(spec: &SystemSpec, provider: &PhiSsProvider) -> Result<Self> {
        match provider {
            PhiSsProvider::GradientAnalytic => spec
                .potential()
                .cloned()
                .map(PhiSs::Potential)
                .ok_or_else(|| Error::Unsupported(format!("system {} has no potential", spec.name()))),
            PhiSsProvider::LinearLyapunov => {
                let ou = OuSpec::from_system(spec)?;
                let sigma_ss = stationary_covariance(&ou)? * spec.alpha();
                let inv = sigma_ss
                    .cholesky()
                    .ok_or(Error::NotSpd { at: vec![] })?
                    .inverse();
                Ok(PhiSs::Quadratic(inv))
            }
            PhiSsProvider::GridNumeric { bounds, cells } => {
                let grid = make_grid(bounds, cells)?;
                let st = stationary_density(spec, &grid)?;
                let alpha = spec.alpha();
                let phi = st.log_density.iter().map(|v| -v / alpha).collect();
                Ok(PhiSs::Grid(GridPhi::new(grid, phi)))
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            PhiSs::Potential(u) => Ok(u.eval(x)),
            PhiSs::Quadratic(h) => {
                let v = DVector::from_column_slice(x);
                Ok(0.5 * v.dot(&(h * &v)))
            }
            PhiSs::Grid(g) => g.value(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            PhiSs::Potential(u) => Ok((0..x.len()).map(|a| u.partial(a).eval(x)).collect()),
            PhiSs::Quadratic(h) => Ok((h * DVector::from_column_slice(x)).as_slice().to_vec()),
            PhiSs::Grid(g) => g.gradient(x),
        }
    }
}

/// Cell-centered samples of `phi_ss` with multilinear interpolation.
/// Gradients are central differences at the centers, one-sided on the edge.
#[derive(Clone, Debug)]
pub struct GridPhi {
    grid: Grid,
    phi: Vec<f64>,
    grad: Vec<Vec<f64>>,
}

impl GridPhi {
    pub fn new(grid: Grid, phi: Vec<f64>) -> Self {
        let grad = (0..grid.dim())
            .map(|axis| {
                let h = grid.h(axis);
                let stride = grid.stride(axis);
                let n = grid.cells()[axis];
                (0..grid.len())
                    .map(|k| {
                        let i = grid.unravel(k)[axis];
                        if i == 0 {
                            (phi[k + stride] - phi[k]) / h
                        } else if i + 1 == n {
                            (phi[k] - phi[k - stride]) / h
                        } else {
                            (phi[k + stride] - phi[k - stride]) / (2.0 * h)
                        }
                    })
                    .collect()
            })
            .collect();
        GridPhi { grid, phi, grad }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn interpolate(&self, samples: &[f64], x: &[f64]) -> Result<f64> {
        let g = &self.grid;
        if x.len() != g.dim() || !g.contains(x) {
            return Err(Error::InvalidInput(format!("point {x:?} lies outside the grid")));
        }
        let mut base = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for a in 0..g.dim() {
            let s = (x[a] - g.lower()[a]) / g.h(a) - 0.5;
            let i0 = (s.floor().max(0.0) as usize).min(g.cells()[a] - 2);
            base[a] = i0;
            frac[a] = (s - i0 as f64).clamp(0.0, 1.0);
        }
        let corners = 1usize << g.dim();
        let mut acc = 0.0;
        for c in 0..corners {
            let mut idx = [0usize; 2];
            let mut w = 1.0;
            for a in 0..g.dim() {
                let up = (c >> a) & 1 == 1;
                idx[a] = base[a] + up as usize;
                w *= if up { frac[a] } else { 1.0 - frac[a] };
            }
            acc += w * samples[g.ravel(idx)];
        }
        Ok(acc)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.interpolate(&self.phi, x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.grad.iter().map(|g| self.interpolate(g, x)).collect()
    }
}

/// Orthogonality data at one point. `norms` are the squared `D^-1` norms of
/// `D grad phi_ss`, `gamma` and `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LandscapeCheck {
    pub x: Vec<f64>,
    pub drift: Vec<f64>,
    pub phi_ss_grad: Vec<f64>,
    pub gamma: Vec<f64>,
    pub ortho: f64,
    pub norms: [f64; 3],
}

impl LandscapeCheck {
    /// `norms[0] + norms[1] - norms[2]`, which equals `2 ortho` identically.
    pub fn pythagorean_residual(&self) -> f64 {
        self.norms[0] + self.norms[1] - self.norms[2]
    }
}

/// `gamma = b + D grad phi` and the norms, from raw inputs.
pub fn landscape_point(x: &[f64], b: &[f64], d: &DMatrix<f64>, grad: &[f64]) -> Result<LandscapeCheck> {
    let b = DVector::from_column_slice(b);
    let p = DVector::from_column_slice(grad);
    let d_inv = d
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd { at: x.to_vec() })?
        .inverse();
    let dp = d * &p;
    let gamma = &b + &dp;
    Ok(LandscapeCheck {
        x: x.to_vec(),
        drift: b.as_slice().to_vec(),
        phi_ss_grad: grad.to_vec(),
        ortho: gamma.dot(&p),
        norms: [
            dp.dot(&p),
            gamma.dot(&(&d_inv * &gamma)),
            b.dot(&(&d_inv * &b)),
        ],
        gamma: gamma.as_slice().to_vec(),
    })
}

pub fn landscape_check(
    spec: &SystemSpec,
    provider: &PhiSsProvider,
    points: &[Vec<f64>],
) -> Result<Vec<LandscapeCheck>> {
    let phi = PhiSs::resolve(spec, provider)?;
    landscape_check_with(spec, &phi, points)
}

pub fn landscape_check_with(spec: &SystemSpec, phi: &PhiSs, points: &[Vec<f64>]) -> Result<Vec<LandscapeCheck>> {
    points
        .iter()
        .map(|x| {
            if x.len() != spec.dim() {
                return Err(Error::InvalidInput("point has the wrong dimension".into()));
            }
            landscape_point(x, &spec.drift(x), &spec.diffusion(x), &phi.gradient(x)?)
        })
        .collect()
}

/// Leading large-alpha parts of `F`, `dF/dt` and `Q_hk`, each divided by
/// alpha, along the deterministic path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MacroFreeEnergy {
    pub t: f64,
    /// `phi_ss(xhat)`, up to a constant.
    pub free_energy: f64,
    /// `-grad phi_ss . D grad phi_ss`.
    pub free_energy_rate: f64,
    /// `gamma . D^-1 gamma`.
    pub qhk: f64,
}

pub fn macroscopic_free_energy(
    spec: &SystemSpec,
    flow: &[FlowPoint],
    provider: &PhiSsProvider,
) -> Result<Vec<MacroFreeEnergy>> {
    let phi = PhiSs::resolve(spec, provider)?;
    flow.iter()
        .map(|p| {
            let x = p.xhat.as_slice();
            let c = landscape_point(x, &spec.drift(x), &spec.diffusion(x), &phi.gradient(x)?)?;
            Ok(MacroFreeEnergy {
                t: p.t,
                free_energy: phi.value(x)?,
                free_energy_rate: -c.norms[0],
                qhk: c.norms[1],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asympt::ode_flow;
    use crate::model::{catalog, CatalogParams};

    fn spec(name: &str, alpha: f64) -> SystemSpec {
        catalog(
            name,
            &CatalogParams {
                alpha: Some(alpha),
                ..Default::default()
            },
        )
        .unwrap()
        .spec
    }

    #[test]
    fn gradient_system_has_no_transverse_part() {
        let s = spec("double_well_2d", 5.0);
        let pts = vec![vec![0.3, -0.7], vec![1.2, 0.4]];
        for c in landscape_check(&s, &PhiSsProvider::GradientAnalytic, &pts).unwrap() {
            assert!(c.gamma.iter().all(|g| g.abs() < 1e-12));
            assert!((c.norms[0] - c.norms[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_is_orthogonal_to_the_landscape() {
        let s = spec("rot_ou", 3.0);
        let pts = vec![vec![0.5, 0.2], vec![-1.0, 2.0]];
        for c in landscape_check(&s, &PhiSsProvider::LinearLyapunov, &pts).unwrap() {
            assert!((c.phi_ss_grad[0] - c.x[0]).abs() < 1e-12);
            assert!(c.ortho.abs() < 1e-12);
            assert!((c.pythagorean_residual() - 2.0 * c.ortho).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_provider_is_an_error() {
        let s = spec("rot_ou", 3.0);
        assert!(landscape_check(&s, &PhiSsProvider::GradientAnalytic, &[vec![0.0, 0.0]]).is_err());
        let s = spec("double_well", 3.0);
        assert!(landscape_check(&s, &PhiSsProvider::LinearLyapunov, &[vec![0.0]]).is_err());
    }

    #[test]
    fn grid_interpolation_is_exact_for_linear_data() {
        let g = make_grid(&[(-1.0, 1.0), (0.0, 2.0)], &[10, 20]).unwrap();
        let phi = g.centers().iter().map(|x| 2.0 * x[0] - x[1] + 0.5).collect();
        let gp = GridPhi::new(g, phi);
        let x = [0.123, 1.77];
        assert!((gp.value(&x).unwrap() - (2.0 * 0.123 - 1.77 + 0.5)).abs() < 1e-12);
        let grad = gp.gradient(&x).unwrap();
        assert!((grad[0] - 2.0).abs() < 1e-12 && (grad[1] + 1.0).abs() < 1e-12);
        assert!(gp.value(&[1.5, 0.0]).is_err());
    }

    #[test]
    fn landscape_descends_along_the_flow() {
        let s = spec("double_well", 10.0);
        let ts: Vec<f64> = (0..=50).map(|k| 0.1 * k as f64).collect();
        let flow = ode_flow(&s, &[0.5], &ts).unwrap();
        let m = macroscopic_free_energy(&s, &flow, &PhiSsProvider::GradientAnalytic).unwrap();
        for w in m.windows(2) {
            assert!(w[1].free_energy <= w[0].free_energy + 1e-10);
            assert!(w[0].free_energy_rate <= 1e-10);
            assert!(w[0].qhk.abs() < 1e-12);
        }
    }

    #[test]
    fn resting_start_is_inert() {
        let s = spec("rot_ou", 2.0);
        let flow = ode_flow(&s, &[0.0, 0.0], &[0.0, 1.0]).unwrap();
        for m in macroscopic_free_energy(&s, &flow, &PhiSsProvider::LinearLyapunov).unwrap() {
            assert_eq!((m.free_energy, m.free_energy_rate, m.qhk), (0.0, 0.0, 0.0));
        }
    }
}

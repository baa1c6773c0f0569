use nalgebra::DVector;
use rayon::prelude::*;

use super::flow::ode_flow;
use crate::error::{Error, Result};
use crate::fpsolve::{init_density, make_grid, FpSolver, InitialCondition, SolverOptions};
use crate::model::SystemSpec;
use crate::ougauss::{ou_entropy_production, ou_heat_exchange, propagate_from_point, OuSpec};
use crate::thermo::ThermoEvaluator;

pub const DEFAULT_ALPHAS: [f64; 5] = [20.0, 40.0, 80.0, 160.0, 320.0];
pub const MIN_SWEEP_POINTS: usize = 4;
/// Absolute slack on the cancellation test, for fits whose standard error
/// is at the level of rounding.
pub const CANCELLATION_FLOOR: f64 = 1e-12;

/// Grid route for nonlinear systems: each member starts from a narrow
/// Gaussian at `x0` and is solved to the probe time.
#[derive(Clone, Debug, PartialEq)]
pub struct FpSweepOptions {
    pub bounds: Vec<(f64, f64)>,
    pub cells: Vec<usize>,
    pub dt: f64,
    /// Initial covariance `eps I`; `None` uses the grid default.
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SweepRoute {
    /// Exact OU moments from a point mass; linear systems only.
    ClosedForm,
    FokkerPlanck(FpSweepOptions),
}

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub intercept_se: f64,
    /// Root mean square of the residuals.
    pub residual_rms: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return Err(Error::RankDeficient);
    }
    let nf = n as f64;
    let xm = x.iter().sum::<f64>() / nf;
    let ym = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::RankDeficient);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let s2 = rss / (nf - 2.0);
    Ok(LinearFit {
        slope,
        slope_se: (s2 / sxx).sqrt(),
        intercept,
        intercept_se: (s2 * (1.0 / nf + xm * xm / sxx)).sqrt(),
        residual_rms: (rss / nf).sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub alphas: Vec<f64>,
    pub ep_values: Vec<f64>,
    pub qex_values: Vec<f64>,
    pub ep_fit: LinearFit,
    pub qex_fit: LinearFit,
    /// Fit of `e_p + Q_ex`.
    pub sum_fit: LinearFit,
    /// `b . D^-1 b` at `xhat(t_probe)`.
    pub predicted_slope: f64,
    pub xhat: DVector<f64>,
    pub t_probe: f64,
}

impl SweepResult {
    /// `|slope(e_p + Q_ex)| <= 3 SE` (plus a rounding floor), and at most 1% of
    /// the predicted slope when that is positive.
    pub fn cancellation_holds(&self) -> bool {
        let s = self.sum_fit.slope.abs();
        let se_ok = s <= 3.0 * self.sum_fit.slope_se + CANCELLATION_FLOOR;
        let rel_ok = self.predicted_slope <= 0.0 || s <= 1e-2 * self.predicted_slope;
        se_ok && rel_ok
    }

    /// Relative deviation of the fitted `e_p` and `-Q_ex` slopes from the
    /// prediction. With a zero prediction the absolute slopes are returned.
    pub fn slope_errors(&self) -> (f64, f64) {
        let p = self.predicted_slope;
        if p > 0.0 {
            (
                (self.ep_fit.slope - p).abs() / p,
                (-self.qex_fit.slope - p).abs() / p,
            )
        } else {
            (self.ep_fit.slope.abs(), self.qex_fit.slope.abs())
        }
    }
}

/// `e_p` and `Q_ex` at `t_probe` for each alpha, regressed on alpha.
pub fn alpha_sweep(
    spec: &SystemSpec,
    alphas: &[f64],
    t_probe: f64,
    x0: &[f64],
    route: &SweepRoute,
) -> Result<SweepResult> {
    if alphas.len() < MIN_SWEEP_POINTS {
        return Err(Error::InvalidInput(format!(
            "alpha sweep needs at least {MIN_SWEEP_POINTS} values, got {}",
            alphas.len()
        )));
    }
    if alphas.iter().any(|a| !(*a > 0.0) || !a.is_finite()) || alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("alphas must be positive and strictly increasing".into()));
    }
    if !(t_probe > 0.0) {
        return Err(Error::InvalidInput("probe time must be positive".into()));
    }
    let flow = ode_flow(spec, x0, &[0.0, t_probe])?;
    let xhat = flow[1].xhat.clone();
    let b = DVector::from_vec(spec.drift(xhat.as_slice()));
    let d = spec.diffusion(xhat.as_slice());
    let d_inv = d
        .cholesky()
        .ok_or_else(|| Error::NotSpd { at: xhat.as_slice().to_vec() })?
        .inverse();
    let predicted_slope = b.dot(&(&d_inv * &b));

    let member = |alpha: f64| -> Result<(f64, f64)> {
        let s = spec.with_alpha(alpha)?;
        match route {
            SweepRoute::ClosedForm => {
                let ou = OuSpec::from_system(&s)?;
                let state = propagate_from_point(&ou, &DVector::from_column_slice(x0), t_probe)?;
                Ok((ou_entropy_production(&ou, &state), ou_heat_exchange(&ou, &state)))
            }
            SweepRoute::FokkerPlanck(o) => {
                let grid = make_grid(&o.bounds, &o.cells)?;
                let f0 = init_density(&grid, &InitialCondition::Dirac { x0: x0.to_vec(), eps: o.eps })?;
                let mut solver = FpSolver::new(
                    &s,
                    &grid,
                    SolverOptions {
                        dt: o.dt,
                        ..Default::default()
                    },
                )?;
                let f = solver.advance(&f0, t_probe)?;
                let eval = ThermoEvaluator::new(&s, &grid, None)?;
                Ok((eval.entropy_production(&f)?, eval.heat_exchange(&f)?))
            }
        }
    };
    let values = alphas
        .par_iter()
        .map(|&a| member(a))
        .collect::<Result<Vec<_>>>()?;
    let ep_values: Vec<f64> = values.iter().map(|v| v.0).collect();
    let qex_values: Vec<f64> = values.iter().map(|v| v.1).collect();
    let sums: Vec<f64> = values.iter().map(|v| v.0 + v.1).collect();
    Ok(SweepResult {
        ep_fit: linear_fit(alphas, &ep_values)?,
        qex_fit: linear_fit(alphas, &qex_values)?,
        sum_fit: linear_fit(alphas, &sums)?,
        alphas: alphas.to_vec(),
        ep_values,
        qex_values,
        predicted_slope,
        xhat,
        t_probe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{catalog, CatalogParams};

    fn spec(name: &str) -> SystemSpec {
        catalog(name, &CatalogParams::default()).unwrap().spec
    }

    #[test]
    fn exact_line_fit() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let fit = linear_fit(&x, &y).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-14 && (fit.intercept - 2.0).abs() < 1e-14);
        assert!(fit.slope_se < 1e-14);
        assert!(matches!(linear_fit(&[1.0; 4], &y), Err(Error::RankDeficient)));
    }

    #[test]
    fn ou_closed_form_sweep() {
        let r = alpha_sweep(&spec("ou1d"), &DEFAULT_ALPHAS, 0.5, &[1.0], &SweepRoute::ClosedForm).unwrap();
        assert!((r.predicted_slope - (-1.0f64).exp()).abs() < 1e-12);
        let (e1, e2) = r.slope_errors();
        assert!(e1 < 0.02 && e2 < 0.02);
        assert!(r.sum_fit.slope.abs() < 1e-3);
        assert!(r.cancellation_holds(), "{:?}", r.sum_fit);
    }

    #[test]
    fn pure_diffusion_has_no_extensive_part() {
        let r = alpha_sweep(
            &spec("pure_diffusion"),
            &DEFAULT_ALPHAS,
            0.5,
            &[0.0],
            &SweepRoute::ClosedForm,
        )
        .unwrap();
        assert_eq!(r.predicted_slope, 0.0);
        let (a, b) = r.slope_errors();
        assert!(a < 1e-9 && b < 1e-9);
    }

    #[test]
    fn too_few_alphas() {
        let err = alpha_sweep(&spec("ou1d"), &[20.0, 40.0, 80.0], 0.5, &[1.0], &SweepRoute::ClosedForm);
        assert!(err.is_err());
        let err = alpha_sweep(&spec("ou1d"), &[20.0, 40.0, 40.0, 80.0], 0.5, &[1.0], &SweepRoute::ClosedForm);
        assert!(err.is_err());
    }

    #[test]
    fn closed_form_needs_linear_drift() {
        let err = alpha_sweep(&spec("double_well"), &DEFAULT_ALPHAS, 0.5, &[0.5], &SweepRoute::ClosedForm);
        assert!(err.is_err());
    }
}

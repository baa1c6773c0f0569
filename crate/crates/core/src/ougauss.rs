//! Exact Ornstein-Uhlenbeck / Gaussian engine.
//!
//! For `b(x) = B x`, constant `D` and size parameter `alpha`, a Gaussian law
//! `N(mu, C)` stays Gaussian with
//!
//! ```text
//! mu' = B mu,        C' = 2 D / alpha + B C + C B^T.
//! ```
//!
//! The rescaled covariance `Sigma = alpha C` is the alpha-free object that the
//! asymptotic theory works with. Every rate below is a closed form obtained
//! from Gaussian second moments of the flux velocity
//! `v(x) = J / f = B x + D C^-1 (x - mu) / alpha`:
//!
//! ```text
//! e_p  =  alpha [ a.D^-1 a + tr(M^T D^-1 M C) ]
//! Q_ex = -alpha [ a.D^-1 a + tr(M^T D^-1 B C) ]
//! Q_hk =  alpha [ a.D^-1 G mu + tr(M^T D^-1 G C) ]
//! ```
//!
//! with `a = B mu`, `M = B + D C^-1 / alpha`, `G = B + D C_ss^-1 / alpha`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::SystemSpec;

/// Linear drift, constant diffusion and size parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct OuSpec {
    b: DMatrix<f64>,
    d: DMatrix<f64>,
    alpha: f64,
}

impl OuSpec {
    pub fn new(b: DMatrix<f64>, d: DMatrix<f64>, alpha: f64) -> Result<Self> {
        let n = b.nrows();
        if n == 0 || b.ncols() != n || d.nrows() != n || d.ncols() != n {
            return Err(Error::InvalidInput("B and D must be square and of equal size".into()));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
        }
        if (&d - d.transpose()).amax() > 0.0 || d.clone().cholesky().is_none() {
            return Err(Error::NotSpd { at: vec![] });
        }
        Ok(OuSpec { b, d, alpha })
    }

    /// Extract the linear structure of a system.
    pub fn from_system(spec: &SystemSpec) -> Result<Self> {
        match (spec.linear(), spec.constant_diffusion()) {
            (Some(b), Some(d)) => OuSpec::new(b.clone(), d.clone(), spec.alpha()),
            _ => Err(Error::Unsupported(format!(
                "system `{}` is not linear with constant diffusion",
                spec.name()
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        OuSpec::new(self.b.clone(), self.d.clone(), alpha)
    }

    /// Largest real part among the eigenvalues of `B`.
    pub fn max_real_eigenvalue(&self) -> f64 {
        self.b
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_hurwitz(&self) -> bool {
        self.max_real_eigenvalue() < 0.0
    }

    fn require_hurwitz(&self) -> Result<()> {
        let max_re = self.max_real_eigenvalue();
        if max_re < 0.0 {
            Ok(())
        } else {
            Err(Error::NotHurwitz { max_re })
        }
    }

    fn d_inv(&self) -> DMatrix<f64> {
        self.d
            .clone()
            .cholesky()
            .expect("D validated SPD")
            .inverse()
    }
}

/// Mean and covariance of a Gaussian law. `cov` is the covariance of the law
/// itself, i.e. `Sigma / alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::InvalidInput("covariance shape does not match mean".into()));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > 1e-12 * cov.amax() {
            return Err(Error::InvalidInput("covariance is not symmetric".into()));
        }
        let cov = symmetrize(&cov);
        if cov.clone().cholesky().is_none() {
            return Err(Error::NotSpd { at: mean.iter().copied().collect() });
        }
        Ok(GaussianState { mean, cov })
    }

    pub fn scalar(mean: f64, var: f64) -> Result<Self> {
        GaussianState::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, var))
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn cov_inv(&self) -> DMatrix<f64> {
        self.cov.clone().cholesky().expect("validated SPD").inverse()
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Transition pair `(e^{Bt}, W(t))` with `W(t) = int_0^t e^{Bs} Q e^{B^T s} ds`.
///
/// Van Loan's block exponential on a short step, then doubling:
/// `W(2h) = W(h) + e^{Bh} W(h) e^{B^T h}`.
fn transition(b: &DMatrix<f64>, q: &DMatrix<f64>, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = b.nrows();
    if t == 0.0 {
        return (DMatrix::identity(n, n), DMatrix::zeros(n, n));
    }
    let norm = b.abs().row_sum().amax().max(q.abs().row_sum().amax());
    let mut doublings = 0u32;
    let mut h = t;
    while norm * h > 0.5 && doublings < 60 {
        h *= 0.5;
        doublings += 1;
    }
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-b * h));
    block.view_mut((0, n), (n, n)).copy_from(&(q * h));
    block.view_mut((n, n), (n, n)).copy_from(&(b.transpose() * h));
    let e = block.exp();
    let phi: DMatrix<f64> = e.view((n, n), (n, n)).transpose();
    let g = e.view((0, n), (n, n)).into_owned();
    let mut w = symmetrize(&(&phi * g));
    let mut phi = phi;
    for _ in 0..doublings {
        w = symmetrize(&(&w + &phi * &w * phi.transpose()));
        phi = &phi * &phi;
    }
    (phi, w)
}

/// Exact moment propagation over time `t >= 0`.
pub fn propagate(ou: &OuSpec, init: &GaussianState, t: f64) -> Result<GaussianState> {
    check_time(t)?;
    if init.dim() != ou.dim() {
        return Err(Error::InvalidInput("state dimension mismatch".into()));
    }
    if t == 0.0 {
        return Ok(init.clone());
    }
    let (phi, w) = transition(&ou.b, &(&ou.d * (2.0 / ou.alpha)), t);
    let mean = &phi * &init.mean;
    let cov = symmetrize(&(&phi * &init.cov * phi.transpose() + w));
    GaussianState::new(mean, cov)
}

/// Law at time `t > 0` started from the point mass at `x0`.
pub fn propagate_from_point(ou: &OuSpec, x0: &DVector<f64>, t: f64) -> Result<GaussianState> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput("time must be positive for a point-mass start".into()));
    }
    let (phi, w) = transition(&ou.b, &(&ou.d * (2.0 / ou.alpha)), t);
    GaussianState::new(&phi * x0, w)
}

/// `Sigma(t) = e^{Bt} Sigma0 e^{B^T t} + int_0^t e^{Bs} 2D e^{B^T s} ds`
/// (alpha-free; `Sigma0 = 0` when omitted).
pub fn sigma_at(ou: &OuSpec, sigma0: Option<&DMatrix<f64>>, t: f64) -> Result<DMatrix<f64>> {
    check_time(t)?;
    let (phi, w) = transition(&ou.b, &(&ou.d * 2.0), t);
    Ok(match sigma0 {
        Some(s0) => symmetrize(&(&phi * s0 * phi.transpose() + w)),
        None => w,
    })
}

/// `e^{Bt}`.
pub fn flow_matrix(ou: &OuSpec, t: f64) -> DMatrix<f64> {
    (&ou.b * t).exp()
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("time must be non-negative, got {t}")))
    }
}

/// Differential entropy `N/2 ln(2 pi e) + 1/2 ln det C`.
pub fn gaussian_entropy(state: &GaussianState) -> f64 {
    let n = state.dim() as f64;
    let chol = state.cov.clone().cholesky().expect("validated SPD");
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    0.5 * n * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + 0.5 * log_det
}

/// The entropy rate computed two ways.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyRate {
    /// `1/2 tr(C^-1 C')`.
    pub trace_form: f64,
    /// `div b + D : (alpha C)^-1`.
    pub flux_form: f64,
}

/// Covariance velocity `C' = 2D/alpha + BC + CB^T`.
pub fn covariance_velocity(ou: &OuSpec, state: &GaussianState) -> DMatrix<f64> {
    &ou.d * (2.0 / ou.alpha) + &ou.b * &state.cov + &state.cov * ou.b.transpose()
}

pub fn gaussian_entropy_rate(ou: &OuSpec, state: &GaussianState) -> EntropyRate {
    let c_inv = state.cov_inv();
    let dc = covariance_velocity(ou, state);
    let trace_form = 0.5 * (&c_inv * dc).trace();
    let sigma_inv = &c_inv / ou.alpha;
    let flux_form = ou.b.trace() + ou.d.component_mul(&sigma_inv).sum();
    EntropyRate {
        trace_form,
        flux_form,
    }
}

/// `M = B + D C^-1 / alpha`, the linear part of the flux velocity.
fn velocity_matrix(ou: &OuSpec, state: &GaussianState) -> DMatrix<f64> {
    &ou.b + &ou.d * state.cov_inv() / ou.alpha
}

pub fn ou_entropy_production(ou: &OuSpec, state: &GaussianState) -> f64 {
    let d_inv = ou.d_inv();
    let a = &ou.b * &state.mean;
    let m = velocity_matrix(ou, state);
    let mean_part = a.dot(&(&d_inv * &a));
    let fluct_part = (m.transpose() * &d_inv * &m * &state.cov).trace();
    ou.alpha * (mean_part + fluct_part)
}

pub fn ou_heat_exchange(ou: &OuSpec, state: &GaussianState) -> f64 {
    let d_inv = ou.d_inv();
    let a = &ou.b * &state.mean;
    let m = velocity_matrix(ou, state);
    let mean_part = a.dot(&(&d_inv * &a));
    let fluct_part = (m.transpose() * &d_inv * &ou.b * &state.cov).trace();
    -ou.alpha * (mean_part + fluct_part)
}

/// Solve `B C + C B^T + 2 D / alpha = 0` for the stationary covariance.
pub fn stationary_covariance(ou: &OuSpec) -> Result<DMatrix<f64>> {
    ou.require_hurwitz()?;
    solve_lyapunov(&ou.b, &(&ou.d * (2.0 / ou.alpha)))
}

/// `A X + X A^T + Q = 0` via Kronecker linearization with one refinement step.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(a) + a.kronecker(&eye);
    let lu = k.lu();
    let rhs = DVector::from_column_slice((-q).as_slice());
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Lyapunov operator".into()))?;
    let residual = |x: &DVector<f64>| -> DVector<f64> {
        let xm = DMatrix::from_column_slice(n, n, x.as_slice());
        let r = -(a * &xm + &xm * a.transpose() + q);
        DVector::from_column_slice(r.as_slice())
    };
    if let Some(dx) = lu.solve(&residual(&x)) {
        x += dx;
    }
    Ok(symmetrize(&DMatrix::from_column_slice(n, n, x.as_slice())))
}

/// Free energy `F = KL(N(mu, C) || N(0, C_ss))` and house-keeping heat rate.
pub fn ou_free_energy_and_qhk(ou: &OuSpec, state: &GaussianState) -> Result<(f64, f64)> {
    let cs = stationary_covariance(ou)?;
    Ok((free_energy_with(&cs, state), housekeeping_with(ou, &cs, state)))
}

fn free_energy_with(cs: &DMatrix<f64>, state: &GaussianState) -> f64 {
    let n = state.dim() as f64;
    let cs_chol = cs.clone().cholesky().expect("stationary covariance SPD");
    let cs_inv = cs_chol.inverse();
    let logdet = |c: &DMatrix<f64>| -> f64 {
        2.0 * c
            .clone()
            .cholesky()
            .expect("SPD")
            .l()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>()
    };
    0.5 * ((&cs_inv * &state.cov).trace() + state.mean.dot(&(&cs_inv * &state.mean)) - n
        + logdet(cs)
        - logdet(&state.cov))
}

fn housekeeping_with(ou: &OuSpec, cs: &DMatrix<f64>, state: &GaussianState) -> f64 {
    let d_inv = ou.d_inv();
    let cs_inv = cs.clone().cholesky().expect("SPD").inverse();
    let g = &ou.b + &ou.d * cs_inv / ou.alpha;
    let a = &ou.b * &state.mean;
    let m = velocity_matrix(ou, state);
    let mean_part = a.dot(&(&d_inv * &g * &state.mean));
    let fluct_part = (m.transpose() * &d_inv * &g * &state.cov).trace();
    ou.alpha * (mean_part + fluct_part)
}

/// `dF/dt` by the chain rule on `(mu, C)`.
pub fn ou_free_energy_rate(ou: &OuSpec, state: &GaussianState) -> Result<f64> {
    let cs = stationary_covariance(ou)?;
    let cs_inv = cs.cholesky().expect("SPD").inverse();
    let dmu = &ou.b * &state.mean;
    let dc = covariance_velocity(ou, state);
    Ok(state.mean.dot(&(&cs_inv * dmu)) + 0.5 * ((cs_inv - state.cov_inv()) * dc).trace())
}

/// All closed-form functionals of one Gaussian state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuRates {
    pub entropy: f64,
    pub entropy_rate: f64,
    pub ep: f64,
    pub qex: f64,
    /// `None` when `B` is not Hurwitz.
    pub free_energy: Option<f64>,
    pub qhk: Option<f64>,
    pub free_energy_rate: Option<f64>,
}

pub fn ou_rates(ou: &OuSpec, state: &GaussianState) -> OuRates {
    let (free_energy, qhk, free_energy_rate) = match stationary_covariance(ou) {
        Ok(cs) => (
            Some(free_energy_with(&cs, state)),
            Some(housekeeping_with(ou, &cs, state)),
            ou_free_energy_rate(ou, state).ok(),
        ),
        Err(_) => (None, None, None),
    };
    OuRates {
        entropy: gaussian_entropy(state),
        entropy_rate: gaussian_entropy_rate(ou, state).trace_form,
        ep: ou_entropy_production(ou, state),
        qex: ou_heat_exchange(ou, state),
        free_energy,
        qhk,
        free_energy_rate,
    }
}

/// The quadratic rate function `phi(x, t) = 1/2 (x - c)^T Sigma^-1(t) (x - c)`
/// with `c = e^{Bt} x0`.
#[derive(Clone, Debug, PartialEq)]
pub struct OuRateFunction {
    pub center: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub hessian: DMatrix<f64>,
}

impl OuRateFunction {
    /// `sigma0 = None` is the point-mass start `Sigma(0) = 0`, which needs `t > 0`.
    pub fn new(
        ou: &OuSpec,
        x0: &DVector<f64>,
        t: f64,
        sigma0: Option<&DMatrix<f64>>,
    ) -> Result<Self> {
        if sigma0.is_none() && !(t > 0.0) {
            return Err(Error::InvalidInput(
                "rate function from a point mass needs t > 0".into(),
            ));
        }
        let sigma = sigma_at(ou, sigma0, t)?;
        let hessian = sigma
            .clone()
            .cholesky()
            .ok_or(Error::NotSpd { at: vec![] })?
            .inverse();
        Ok(OuRateFunction {
            center: flow_matrix(ou, t) * x0,
            sigma,
            hessian: symmetrize(&hessian),
        })
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let y = x - &self.center;
        0.5 * y.dot(&(&self.hessian * &y))
    }
}

/// `phi(x, t)` for a point-mass start at `x0`.
pub fn ou_rate_function(ou: &OuSpec, x0: &DVector<f64>, t: f64, x: &DVector<f64>) -> Result<f64> {
    Ok(OuRateFunction::new(ou, x0, t, None)?.value(x))
}

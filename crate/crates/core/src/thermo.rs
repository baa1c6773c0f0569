//! Entropy, entropy production, heat exchange, free energy and house-keeping
//! heat of a density on the solver grid, and the balance residuals along a
//! solution.
//!
//! Rates are sums over interior faces, built from the same fitted face flux
//! `J` the solver uses. With `w` the face Peclet number and `area = vol / h`:
//!
//! ```text
//! e_p  =  sum area J (w - ln(f_r / f_l))
//! Q_ex = -sum area J w
//! Q_hk =  sum area J (w - ln(pi_r / pi_l))
//! ```
//!
//! Each `e_p` term is non-negative because `J` has the sign of
//! `w - ln(f_r / f_l)`. As `h -> 0` the sums tend to `alpha int J D^-1 J / f`,
//! `-alpha int J D^-1 b` and the house-keeping integral. On the semi-discrete
//! dynamics they satisfy `dS/dt = e_p + Q_ex` and `dF/dt = -e_p + Q_hk`
//! exactly, so the residuals along a run measure time-stepping error only.

use crate::error::{Error, Result};
use crate::fpsolve::{DensityField, Discretization, Grid, StationarySolution};
use crate::model::SystemSpec;

/// Cells below `DENSITY_FLOOR * max f` are left out of every integrand.
pub const DENSITY_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermoRecord {
    pub t: f64,
    pub entropy: f64,
    pub ep: f64,
    pub qex: f64,
    pub free_energy: f64,
    pub qhk: f64,
    pub dsdt_fd: f64,
    pub dfdt_fd: f64,
    pub res_entropy: f64,
    pub res_freeenergy: f64,
    /// Time derivatives at this record are one-sided (first or last record).
    pub one_sided: bool,
}

/// Instantaneous functionals of one snapshot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermoState {
    pub entropy: f64,
    pub ep: f64,
    pub qex: f64,
    pub free_energy: f64,
    pub qhk: f64,
}

/// Evaluates the functionals for one system on one grid, reusing the face set.
pub struct ThermoEvaluator<'a> {
    disc: Discretization,
    stationary: Option<&'a StationarySolution>,
}

impl<'a> ThermoEvaluator<'a> {
    pub fn new(
        spec: &SystemSpec,
        grid: &Grid,
        stationary: Option<&'a StationarySolution>,
    ) -> Result<Self> {
        if let Some(st) = stationary {
            if st.density.grid() != grid {
                return Err(Error::GridMismatch);
            }
        }
        Ok(ThermoEvaluator {
            disc: Discretization::new(spec, grid)?,
            stationary,
        })
    }

    fn check(&self, f: &DensityField) -> Result<()> {
        if f.grid() != self.disc.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn entropy(&self, f: &DensityField) -> Result<f64> {
        self.check(f)?;
        Ok(shannon_entropy(f))
    }

    /// Sum over faces with both cells above the floor of
    /// `area * J * weight(face, ln f_l, ln f_r)`.
    fn face_sum(&self, f: &DensityField, weight: impl Fn(usize, f64, f64, f64) -> f64) -> f64 {
        let v = f.values();
        let cut = DENSITY_FLOOR * f.max();
        let mut acc = 0.0;
        for (k, face) in self.disc.faces().iter().enumerate() {
            let (fl, fr) = (v[face.left], v[face.right]);
            if fl < cut || fr < cut || fl <= 0.0 || fr <= 0.0 {
                continue;
            }
            let j = face.flux(v);
            acc += face.area * j * weight(k, face.peclet, fl.ln(), fr.ln());
        }
        acc
    }

    pub fn entropy_production(&self, f: &DensityField) -> Result<f64> {
        self.check(f)?;
        Ok(self.face_sum(f, |_, w, ll, lr| w - (lr - ll)))
    }

    pub fn heat_exchange(&self, f: &DensityField) -> Result<f64> {
        self.check(f)?;
        Ok(-self.face_sum(f, |_, w, _, _| w))
    }

    fn stationary(&self) -> Result<&StationarySolution> {
        self.stationary.ok_or_else(|| {
            Error::InvalidInput("free energy and house-keeping heat need a stationary density".into())
        })
    }

    pub fn free_energy(&self, f: &DensityField) -> Result<f64> {
        self.check(f)?;
        let log_pi = &self.stationary()?.log_density;
        let vol = f.grid().cell_volume();
        let cut = DENSITY_FLOOR * f.max();
        Ok(f
            .values()
            .iter()
            .zip(log_pi)
            .filter(|(&v, _)| v >= cut && v > 0.0)
            .map(|(&v, &lp)| v * (v.ln() - lp))
            .sum::<f64>()
            * vol)
    }

    pub fn housekeeping_heat(&self, f: &DensityField) -> Result<f64> {
        self.check(f)?;
        let log_pi = &self.stationary()?.log_density;
        let faces = self.disc.faces();
        Ok(self.face_sum(f, |k, w, _, _| {
            let face = &faces[k];
            w - (log_pi[face.right] - log_pi[face.left])
        }))
    }

    pub fn state(&self, f: &DensityField) -> Result<ThermoState> {
        Ok(ThermoState {
            entropy: self.entropy(f)?,
            ep: self.entropy_production(f)?,
            qex: self.heat_exchange(f)?,
            free_energy: self.free_energy(f)?,
            qhk: self.housekeeping_heat(f)?,
        })
    }
}

/// `-int f ln f` by the midpoint rule.
pub fn shannon_entropy(f: &DensityField) -> f64 {
    let cut = DENSITY_FLOOR * f.max();
    -f.values()
        .iter()
        .filter(|&&v| v >= cut && v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
        * f.grid().cell_volume()
}

pub fn entropy_production_rate(spec: &SystemSpec, f: &DensityField) -> Result<f64> {
    ThermoEvaluator::new(spec, f.grid(), None)?.entropy_production(f)
}

pub fn heat_exchange_rate(spec: &SystemSpec, f: &DensityField) -> Result<f64> {
    ThermoEvaluator::new(spec, f.grid(), None)?.heat_exchange(f)
}

/// Relative entropy `int f ln(f / pi)`.
pub fn free_energy(spec: &SystemSpec, f: &DensityField, stationary: &StationarySolution) -> Result<f64> {
    ThermoEvaluator::new(spec, f.grid(), Some(stationary))?.free_energy(f)
}

pub fn housekeeping_heat_rate(
    spec: &SystemSpec,
    f: &DensityField,
    stationary: &StationarySolution,
) -> Result<f64> {
    ThermoEvaluator::new(spec, f.grid(), Some(stationary))?.housekeeping_heat(f)
}

/// Common spacing of snapshot times, or an error if they are not uniform.
fn uniform_spacing(times: &[f64]) -> Result<f64> {
    if times.len() < 3 {
        return Err(Error::InvalidInput("need at least 3 snapshots".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::NonUniformSpacing);
    }
    for (k, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(times[k].abs()) {
            return Err(Error::NonUniformSpacing);
        }
    }
    Ok(dt)
}

/// Centered differences inside, one-sided at the ends.
fn differentiate(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|k| match k {
            0 => (values[1] - values[0]) / dt,
            k if k == n - 1 => (values[n - 1] - values[n - 2]) / dt,
            k => (values[k + 1] - values[k - 1]) / (2.0 * dt),
        })
        .collect()
}

/// Functionals and balance residuals along uniformly spaced snapshots.
pub fn instrument(
    spec: &SystemSpec,
    snapshots: &[DensityField],
    stationary: &StationarySolution,
) -> Result<Vec<ThermoRecord>> {
    let times: Vec<f64> = snapshots.iter().map(|f| f.time()).collect();
    uniform_spacing(&times)?;
    let eval = ThermoEvaluator::new(spec, snapshots[0].grid(), Some(stationary))?;
    let states = snapshots
        .iter()
        .map(|f| eval.state(f))
        .collect::<Result<Vec<_>>>()?;
    records_from_states(&times, &states)
}

/// Records from functionals sampled at uniformly spaced times.
pub fn records_from_states(times: &[f64], states: &[ThermoState]) -> Result<Vec<ThermoRecord>> {
    if times.len() != states.len() {
        return Err(Error::InvalidInput("times and states differ in length".into()));
    }
    let dt = uniform_spacing(times)?;
    let s: Vec<f64> = states.iter().map(|x| x.entropy).collect();
    let fe: Vec<f64> = states.iter().map(|x| x.free_energy).collect();
    let dsdt = differentiate(&s, dt);
    let dfdt = differentiate(&fe, dt);
    let n = states.len();
    Ok(states
        .iter()
        .enumerate()
        .map(|(k, x)| ThermoRecord {
            t: times[k],
            entropy: x.entropy,
            ep: x.ep,
            qex: x.qex,
            free_energy: x.free_energy,
            qhk: x.qhk,
            dsdt_fd: dsdt[k],
            dfdt_fd: dfdt[k],
            res_entropy: (dsdt[k] - x.ep - x.qex).abs(),
            res_freeenergy: (dfdt[k] + x.ep - x.qhk).abs(),
            one_sided: k == 0 || k == n - 1,
        })
        .collect())
}

/// Max over interior times of `|Q_ex - alpha d/dt E[U]|`.
pub fn gradient_heat_identity(spec: &SystemSpec, snapshots: &[DensityField]) -> Result<f64> {
    let u = spec.potential().ok_or_else(|| {
        Error::Unsupported(format!("system {} has no potential", spec.name()))
    })?;
    let times: Vec<f64> = snapshots.iter().map(|f| f.time()).collect();
    let dt = uniform_spacing(&times)?;
    let eval = ThermoEvaluator::new(spec, snapshots[0].grid(), None)?;
    let eu: Vec<f64> = snapshots.iter().map(|f| f.expect(|x| u.eval(x))).collect();
    let deu = differentiate(&eu, dt);
    let mut worst: f64 = 0.0;
    for k in 1..snapshots.len() - 1 {
        let qex = eval.heat_exchange(&snapshots[k])?;
        worst = worst.max((qex - spec.alpha() * deu[k]).abs());
    }
    Ok(worst)
}

/// `|residual| <= max(abs, rel (|e_p| + |Q_ex|))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BalanceTolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for BalanceTolerance {
    fn default() -> Self {
        BalanceTolerance { abs: 1e-3, rel: 1e-2 }
    }
}

impl BalanceTolerance {
    pub fn allowed(&self, ep: f64, qex: f64) -> f64 {
        self.abs.max(self.rel * (ep.abs() + qex.abs()))
    }
}

/// Upper bound on `dF/dt` along any run.
pub const LYAPUNOV_SLACK: f64 = 1e-6;
/// Lower bound accepted for the non-negative rates and `F`.
pub const NONNEGATIVE_SLACK: f64 = -1e-10;

/// First failing record for one of the checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub t: f64,
    pub value: f64,
    pub allowed: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BalanceSummary {
    /// Interior records after burn-in that were checked.
    pub checked: usize,
    pub max_res_entropy: f64,
    pub max_res_freeenergy: f64,
    pub max_dfdt: f64,
    /// Records with `ep`, `qhk` or `F` below the non-negativity slack.
    pub negativity_count: usize,
    pub entropy_violation: Option<Violation>,
    pub freeenergy_violation: Option<Violation>,
    pub lyapunov_violation: Option<Violation>,
}

impl BalanceSummary {
    pub fn passed(&self) -> bool {
        self.checked > 0
            && self.negativity_count == 0
            && self.entropy_violation.is_none()
            && self.freeenergy_violation.is_none()
            && self.lyapunov_violation.is_none()
    }
}

/// Checks both balances on interior records with `t >= t0 + burn_in`, and
/// `dF/dt <= LYAPUNOV_SLACK` and non-negativity on every record.
pub fn check_balances(records: &[ThermoRecord], tol: BalanceTolerance, burn_in: f64) -> BalanceSummary {
    let mut out = BalanceSummary {
        max_dfdt: f64::NEG_INFINITY,
        ..Default::default()
    };
    let Some(first) = records.first() else {
        return out;
    };
    let start = first.t + burn_in;
    for r in records {
        if r.ep < NONNEGATIVE_SLACK || r.qhk < NONNEGATIVE_SLACK || r.free_energy < NONNEGATIVE_SLACK {
            out.negativity_count += 1;
        }
        if r.t >= start - 1e-12 {
            out.max_dfdt = out.max_dfdt.max(r.dfdt_fd);
            if r.dfdt_fd > LYAPUNOV_SLACK && out.lyapunov_violation.is_none() {
                out.lyapunov_violation = Some(Violation {
                    t: r.t,
                    value: r.dfdt_fd,
                    allowed: LYAPUNOV_SLACK,
                });
            }
        }
        if r.one_sided || r.t < start - 1e-12 {
            continue;
        }
        out.checked += 1;
        let allowed = tol.allowed(r.ep, r.qex);
        out.max_res_entropy = out.max_res_entropy.max(r.res_entropy);
        out.max_res_freeenergy = out.max_res_freeenergy.max(r.res_freeenergy);
        if r.res_entropy > allowed && out.entropy_violation.is_none() {
            out.entropy_violation = Some(Violation { t: r.t, value: r.res_entropy, allowed });
        }
        if r.res_freeenergy > allowed && out.freeenergy_violation.is_none() {
            out.freeenergy_violation = Some(Violation { t: r.t, value: r.res_freeenergy, allowed });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpsolve::{
        init_density, make_grid, stationary_density, uniform_times, FpSolver, InitialCondition,
        SolverOptions,
    };
    use crate::model::{catalog, CatalogParams};
    use nalgebra::DMatrix;

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

    fn gaussian(mean: f64, var: f64) -> InitialCondition {
        InitialCondition::Gaussian {
            mean: vec![mean],
            cov: DMatrix::from_element(1, 1, var),
        }
    }

    #[test]
    fn uniform_entropies() {
        let g = make_grid(&[(0.0, 1.0)], &[100]).unwrap();
        let f = init_density(&g, &InitialCondition::Uniform).unwrap();
        assert!(shannon_entropy(&f).abs() < 1e-14);
        let g = make_grid(&[(0.0, 2.0)], &[100]).unwrap();
        let f = init_density(&g, &InitialCondition::Uniform).unwrap();
        assert!((shannon_entropy(&f) - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn standard_gaussian_entropy() {
        let g = make_grid(&[(-8.0, 8.0)], &[1600]).unwrap();
        let f = init_density(&g, &gaussian(0.0, 1.0)).unwrap();
        assert!((shannon_entropy(&f) - 1.4189385332046727).abs() < 1e-6);
    }

    #[test]
    fn gibbs_state_is_an_equilibrium() {
        let s = spec("double_well", 20.0);
        let g = make_grid(&[(-3.0, 3.0)], &[600]).unwrap();
        let st = stationary_density(&s, &g).unwrap();
        let ev = ThermoEvaluator::new(&s, &g, Some(&st)).unwrap();
        let x = ev.state(&st.density).unwrap();
        assert!(x.ep.abs() < 1e-8);
        assert!(x.qex.abs() < 1e-8);
        assert!(x.qhk.abs() < 1e-8);
        assert!(x.free_energy.abs() < 1e-12);
    }

    #[test]
    fn helmholtz_form_of_free_energy() {
        let s = spec("double_well", 20.0);
        let g = make_grid(&[(-3.0, 3.0)], &[600]).unwrap();
        let st = stationary_density(&s, &g).unwrap();
        let f = init_density(&g, &gaussian(0.3, 0.02)).unwrap();
        let u = s.potential().unwrap();
        let helm = 20.0 * f.expect(|x| u.eval(x)) - shannon_entropy(&f) + st.normalization.unwrap().ln();
        let fe = free_energy(&s, &f, &st).unwrap();
        assert!((fe - helm).abs() < 1e-6, "{fe} vs {helm}");
    }

    #[test]
    fn displaced_ou_free_energy() {
        let s = spec("ou1d", 10.0);
        let g = make_grid(&[(-3.0, 3.0)], &[600]).unwrap();
        let st = stationary_density(&s, &g).unwrap();
        let f = init_density(&g, &gaussian(0.4, 0.1)).unwrap();
        let fe = free_energy(&s, &f, &st).unwrap();
        assert!((fe / (5.0 * 0.16) - 1.0).abs() < 0.01, "{fe}");
        assert!(housekeeping_heat_rate(&s, &f, &st).unwrap().abs() < 1e-8);
    }

    #[test]
    fn rotational_steady_state() {
        let s = spec("rot_ou", 8.0);
        let g = make_grid(&[(-2.5, 2.5), (-2.5, 2.5)], &[100, 100]).unwrap();
        let st = stationary_density(&s, &g).unwrap();
        let c = st.density.covariance();
        assert!((c[(0, 0)] - 0.125).abs() < 2e-3 && (c[(1, 1)] - 0.125).abs() < 2e-3);
        assert!(c[(0, 1)].abs() < 1e-6);
        let ev = ThermoEvaluator::new(&s, &g, Some(&st)).unwrap();
        let x = ev.state(&st.density).unwrap();
        assert!((x.ep / 2.0 - 1.0).abs() < 0.01, "{}", x.ep);
        assert!((x.qex + x.ep).abs() < 1e-6);
        assert!((x.qhk - x.ep).abs() < 1e-6);
    }

    #[test]
    fn relaxation_balances() {
        let s = spec("ou1d", 10.0);
        let g = make_grid(&[(-3.0, 3.0)], &[600]).unwrap();
        let st = stationary_density(&s, &g).unwrap();
        let f0 = init_density(&g, &gaussian(1.0, 0.05)).unwrap();
        let mut solver = FpSolver::new(&s, &g, SolverOptions::default()).unwrap();
        let times = uniform_times(1.0, 0.01, true);
        let snaps = solver.solve(&f0, 1.0, &times).unwrap();
        let recs = instrument(&s, &snaps, &st).unwrap();
        let sum = check_balances(&recs, BalanceTolerance::default(), 0.01);
        assert!(sum.passed(), "{sum:?}");
        assert!(recs.iter().all(|r| r.dfdt_fd <= 1e-6));
        let dev = gradient_heat_identity(&s, &snaps).unwrap();
        let qmax = recs.iter().map(|r| r.qex.abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-3f64.max(0.01 * qmax), "{dev}");
    }

    #[test]
    fn replicated_stationary_input() {
        let s = spec("ou1d", 10.0);
        let g = make_grid(&[(-3.0, 3.0)], &[200]).unwrap();
        let st = stationary_density(&s, &g).unwrap();
        let snaps: Vec<_> = (0..5).map(|k| st.density.clone().with_time(0.01 * k as f64)).collect();
        let recs = instrument(&s, &snaps, &st).unwrap();
        for r in &recs {
            assert!(r.res_entropy <= 1e-9 && r.res_freeenergy <= 1e-9);
        }
        assert!(gradient_heat_identity(&s, &snaps).unwrap() <= 1e-8);
    }

    #[test]
    fn spacing_must_be_uniform() {
        let s = spec("ou1d", 10.0);
        let g = make_grid(&[(-3.0, 3.0)], &[200]).unwrap();
        let st = stationary_density(&s, &g).unwrap();
        let snaps: Vec<_> = [0.0, 0.01, 0.03]
            .iter()
            .map(|&t| st.density.clone().with_time(t))
            .collect();
        assert!(matches!(instrument(&s, &snaps, &st), Err(Error::NonUniformSpacing)));
        assert!(instrument(&s, &snaps[..2], &st).is_err());
    }

    #[test]
    fn heat_identity_needs_a_potential() {
        let s = spec("rot_ou", 2.0);
        let g = make_grid(&[(-3.0, 3.0), (-3.0, 3.0)], &[16, 16]).unwrap();
        let f = init_density(&g, &InitialCondition::Uniform).unwrap();
        let snaps = vec![f.clone(), f.clone().with_time(0.1), f.with_time(0.2)];
        assert!(gradient_heat_identity(&s, &snaps).is_err());
    }
}

use super::band::{BandLu, BandMatrix};
use super::{DensityField, Discretization, Grid};
use crate::error::{Error, Result};
use crate::model::SystemSpec;

pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub dt: f64,
    /// Abort when the outermost cell layer holds more than this mass.
    /// `None` disables the check (e.g. for uniform or wall-touching states).
    pub boundary_mass_limit: Option<f64>,
    /// Allowed mass drift per unit time.
    pub mass_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            dt: DEFAULT_DT,
            boundary_mass_limit: Some(1e-8),
            mass_tolerance: 1e-9,
        }
    }
}

/// Implicit-Euler Fokker-Planck integrator. Factorizations of `I - dt L` are
/// cached per step size.
pub struct FpSolver {
    disc: Discretization,
    opts: SolverOptions,
    factors: Vec<(f64, BandLu)>,
}

const NEGATIVITY_LIMIT: f64 = -1e-14;
const MAX_CACHED_FACTORS: usize = 4;

impl FpSolver {
    pub fn new(spec: &SystemSpec, grid: &Grid, opts: SolverOptions) -> Result<Self> {
        if !(opts.dt > 0.0 && opts.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", opts.dt)));
        }
        let disc = Discretization::new(spec, grid)?;
        let mut solver = FpSolver {
            disc,
            opts,
            factors: Vec::new(),
        };
        solver.factor_for(opts.dt)?;
        Ok(solver)
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn dt(&self) -> f64 {
        self.opts.dt
    }

    fn factor_for(&mut self, dt: f64) -> Result<usize> {
        if let Some(pos) = self.factors.iter().position(|(d, _)| *d == dt) {
            return Ok(pos);
        }
        let lu = shifted_operator(&self.disc, dt).factor()?;
        if self.factors.len() >= MAX_CACHED_FACTORS {
            // keep the configured step, evict the oldest other entry
            self.factors.remove(1);
        }
        self.factors.push((dt, lu));
        Ok(self.factors.len() - 1)
    }

    /// One implicit Euler step of the configured size.
    pub fn step(&mut self, density: &DensityField) -> Result<DensityField> {
        let dt = self.opts.dt;
        self.step_with(density, dt)
    }

    fn step_with(&mut self, density: &DensityField, dt: f64) -> Result<DensityField> {
        self.check_grid(density)?;
        let slot = self.factor_for(dt)?;
        let mut next = density.values().to_vec();
        self.factors[slot].1.solve_in_place(&mut next);
        let t = density.time() + dt;
        for (cell, v) in next.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v < NEGATIVITY_LIMIT || !v.is_finite() {
                    return Err(Error::Negativity { t, cell, value: *v });
                }
                *v = 0.0;
            }
        }
        let out = DensityField::raw(self.disc.grid().clone(), next, t);
        if let Some(limit) = self.opts.boundary_mass_limit {
            let mass = out.boundary_mass();
            if mass > limit {
                return Err(Error::BoundaryMass { t, mass });
            }
        }
        Ok(out)
    }

    /// Advance by `span` using steps of the configured size; a final uneven
    /// remainder is taken as equal substeps with its own factorization.
    pub fn advance(&mut self, density: &DensityField, span: f64) -> Result<DensityField> {
        if !(span >= 0.0) {
            return Err(Error::InvalidInput(format!("cannot advance by {span}")));
        }
        if span == 0.0 {
            return Ok(density.clone());
        }
        let dt = self.opts.dt;
        let ratio = span / dt;
        let (steps, h) = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) && ratio.round() >= 1.0 {
            (ratio.round() as usize, dt)
        } else {
            let n = ratio.ceil().max(1.0) as usize;
            (n, span / n as f64)
        };
        let t0 = density.time();
        let mass0 = density.mass();
        let mut f = density.clone();
        for k in 1..=steps {
            f = self.step_with(&f, h)?;
            f = f.with_time(t0 + h * k as f64);
        }
        let f = f.with_time(t0 + span);
        let drift = (f.mass() - mass0).abs();
        if drift > self.opts.mass_tolerance * span.max(1.0) {
            return Err(Error::MassLoss { t: f.time(), drift });
        }
        Ok(f)
    }

    /// Integrate to `t_end`, returning one snapshot per requested time.
    pub fn solve(
        &mut self,
        f0: &DensityField,
        t_end: f64,
        output_times: &[f64],
    ) -> Result<Vec<DensityField>> {
        self.check_grid(f0)?;
        let start = f0.time();
        if !(t_end >= start) {
            return Err(Error::InvalidInput("t_end precedes the initial time".into()));
        }
        if output_times.windows(2).any(|w| w[1] < w[0])
            || output_times.iter().any(|&t| t < start || t > t_end)
        {
            return Err(Error::InvalidInput(
                "output times must be sorted and inside [t0, t_end]".into(),
            ));
        }
        let mut out = Vec::with_capacity(output_times.len());
        let mut f = f0.clone();
        for &t in output_times {
            f = self.advance(&f, t - f.time())?;
            out.push(f.clone());
        }
        Ok(out)
    }

    fn check_grid(&self, density: &DensityField) -> Result<()> {
        if density.grid() != self.disc.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Banded `I - dt L`.
pub(crate) fn shifted_operator(disc: &Discretization, dt: f64) -> BandMatrix {
    let n = disc.grid().len();
    let mut m = BandMatrix::identity(n, disc.bandwidth());
    for (i, j, v) in disc.generator_entries() {
        *m.at_mut(i, j) -= dt * v;
    }
    m
}

/// Uniformly spaced output times `spacing, 2 spacing, ...` up to `t_end`,
/// optionally starting with 0.
pub fn uniform_times(t_end: f64, spacing: f64, include_zero: bool) -> Vec<f64> {
    let n = (t_end / spacing + 1e-9).floor() as usize;
    let first = if include_zero { 0 } else { 1 };
    (first..=n).map(|k| k as f64 * spacing).collect()
}

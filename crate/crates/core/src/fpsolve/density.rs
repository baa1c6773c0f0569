use nalgebra::{DMatrix, DVector};

use super::Grid;
use crate::error::{Error, Result};

/// Probability density sampled per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
    time: f64,
}

/// Mass that may lie outside the box before a Gaussian start is refused.
pub const MAX_OUTSIDE_MASS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    Gaussian {
        mean: Vec<f64>,
        cov: DMatrix<f64>,
    },
    /// Point mass, realized as a Gaussian with covariance `eps * I`
    /// (default `eps = 4 h^2` with `h` the widest cell).
    Dirac { x0: Vec<f64>, eps: Option<f64> },
    Uniform,
    Cells(Vec<f64>),
}

impl DensityField {
    /// Wrap raw cell values; they must be non-negative with positive mass.
    /// Values are normalized.
    pub fn from_values(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} cell values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("density values must be finite and non-negative".into()));
        }
        let mut f = DensityField { grid, values, time };
        if f.mass() <= 0.0 {
            return Err(Error::InvalidInput("density has zero mass".into()));
        }
        f.normalize();
        Ok(f)
    }

    /// Wrap values without normalizing (solver output).
    pub(crate) fn raw(grid: Grid, values: Vec<f64>, time: f64) -> Self {
        DensityField { grid, values, time }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Cell-volume-weighted sum.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn normalize(&mut self) {
        let m = self.mass();
        self.values.iter_mut().for_each(|v| *v /= m);
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Mass held by the outermost layer of cells.
    pub fn boundary_mass(&self) -> f64 {
        let vol = self.grid.cell_volume();
        (0..self.values.len())
            .filter(|&k| self.grid.is_boundary_cell(k))
            .map(|k| self.values[k] * vol)
            .sum()
    }

    /// `E[g(x)]` by the midpoint rule.
    pub fn expect(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        let vol = self.grid.cell_volume();
        self.values
            .iter()
            .enumerate()
            .map(|(k, &v)| v * g(&self.grid.center(k)))
            .sum::<f64>()
            * vol
    }

    pub fn mean(&self) -> DVector<f64> {
        let n = self.grid.dim();
        let mut m = DVector::zeros(n);
        for a in 0..n {
            m[a] = self.expect(|x| x[a]) / self.mass();
        }
        m
    }

    /// Midpoint-rule covariance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.grid.dim();
        let m = self.mean();
        let mass = self.mass();
        DMatrix::from_fn(n, n, |i, j| {
            self.expect(|x| (x[i] - m[i]) * (x[j] - m[j])) / mass
        })
    }

    /// Total-variation distance `1/2 int |f - g|`.
    pub fn total_variation(&self, other: &DensityField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(0.5
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
            * self.grid.cell_volume())
    }

    /// `int |f - g|`.
    pub fn l1_distance(&self, other: &DensityField) -> Result<f64> {
        Ok(2.0 * self.total_variation(other)?)
    }
}

/// Sample an initial condition on the grid and normalize it.
pub fn init_density(grid: &Grid, kind: &InitialCondition) -> Result<DensityField> {
    match kind {
        InitialCondition::Uniform => {
            DensityField::from_values(grid.clone(), vec![1.0; grid.len()], 0.0)
        }
        InitialCondition::Cells(v) => DensityField::from_values(grid.clone(), v.clone(), 0.0),
        InitialCondition::Dirac { x0, eps } => {
            let h = grid.widths().into_iter().fold(0.0, f64::max);
            let eps = eps.unwrap_or(4.0 * h * h);
            let n = grid.dim();
            init_density(
                grid,
                &InitialCondition::Gaussian {
                    mean: x0.clone(),
                    cov: DMatrix::identity(n, n) * eps,
                },
            )
        }
        InitialCondition::Gaussian { mean, cov } => {
            let n = grid.dim();
            if mean.len() != n || cov.nrows() != n || cov.ncols() != n {
                return Err(Error::InvalidInput("Gaussian parameters do not match grid dimension".into()));
            }
            let chol = cov
                .clone()
                .cholesky()
                .ok_or_else(|| Error::NotSpd { at: mean.clone() })?;
            let inv = chol.inverse();
            let det = chol.l().diagonal().product().powi(2);
            let norm = ((2.0 * std::f64::consts::PI).powi(n as i32) * det).sqrt();
            let values: Vec<f64> = (0..grid.len())
                .map(|k| {
                    let x = grid.center(k);
                    let y = DVector::from_iterator(n, x.iter().zip(mean).map(|(a, b)| a - b));
                    (-0.5 * y.dot(&(&inv * &y))).exp() / norm
                })
                .collect();
            let inside: f64 = values.iter().sum::<f64>() * grid.cell_volume();
            if inside < 1.0 - MAX_OUTSIDE_MASS {
                return Err(Error::DomainTooSmall(format!(
                    "initial Gaussian has {:.3e} of its mass outside the box",
                    1.0 - inside
                )));
            }
            DensityField::from_values(grid.clone(), values, 0.0)
        }
    }
}

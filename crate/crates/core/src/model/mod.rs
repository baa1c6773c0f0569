//! Diffusion systems `dx = b(x) dt + sqrt(2 D(x) / alpha) dW` and the catalog
//! of analytically tractable members used throughout the crate.
//!
//! Fields are polynomial so the drift Jacobian, its divergence and the
//! potential gradient are exact.

mod catalog;
mod config;
mod poly;

pub use catalog::{catalog, catalog_names, CatalogEntry, CatalogParams, KnownQuantities};
pub use config::{build_system, MatrixParam, SystemConfig, TermConfig};
pub use poly::{Poly, Term};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Diffusion tensor representation.
#[derive(Clone, Debug, PartialEq)]
pub enum DiffusionField {
    /// Constant symmetric positive definite matrix.
    Constant(DMatrix<f64>),
    /// Diagonal with one polynomial per axis.
    Diagonal(Vec<Poly>),
}

/// An immutable diffusion system.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    name: String,
    dim: usize,
    alpha: f64,
    drift: Vec<Poly>,
    diffusion: DiffusionField,
    potential: Option<Poly>,
    linear: Option<DMatrix<f64>>,
}

impl SystemSpec {
    /// Assemble and validate a system. `potential` asserts `b = -D grad U`;
    /// `linear` asserts `b(x) = B x` with constant `D`.
    pub fn new(
        name: impl Into<String>,
        alpha: f64,
        drift: Vec<Poly>,
        diffusion: DiffusionField,
        potential: Option<Poly>,
        linear: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let dim = drift.len();
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must be positive and finite, got {alpha}"
            )));
        }
        if drift.iter().any(|p| p.dim() != dim) {
            return Err(Error::InvalidInput("drift component arity mismatch".into()));
        }
        match &diffusion {
            DiffusionField::Constant(d) if d.nrows() != dim || d.ncols() != dim => {
                return Err(Error::InvalidInput("diffusion matrix shape mismatch".into()))
            }
            DiffusionField::Diagonal(ps) if ps.len() != dim || ps.iter().any(|p| p.dim() != dim) => {
                return Err(Error::InvalidInput("diffusion diagonal arity mismatch".into()))
            }
            _ => {}
        }
        if let Some(u) = &potential {
            if u.dim() != dim {
                return Err(Error::InvalidInput("potential arity mismatch".into()));
            }
        }
        if let Some(b) = &linear {
            if b.nrows() != dim || b.ncols() != dim {
                return Err(Error::InvalidInput("linear drift matrix shape mismatch".into()));
            }
            if !matches!(diffusion, DiffusionField::Constant(_)) {
                return Err(Error::InvalidInput(
                    "linear metadata requires constant diffusion".into(),
                ));
            }
        }
        let spec = SystemSpec {
            name: name.into(),
            dim,
            alpha,
            drift,
            diffusion,
            potential,
            linear,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Probe the invariants at a fixed set of sample points.
    fn validate(&self) -> Result<()> {
        for x in probe_points(self.dim) {
            self.eval_diffusion(&x)?;
            let b = self.eval_drift(&x)?;
            if let Some(bm) = &self.linear {
                let bx = bm * nalgebra::DVector::from_column_slice(&x);
                let scale = 1.0 + bx.amax();
                if b.iter().zip(bx.iter()).any(|(u, v)| (u - v).abs() > 1e-12 * scale) {
                    return Err(Error::LinearMismatch { at: x });
                }
            }
            if self.potential.is_some() {
                let dev = self.gradient_deviation(&x);
                let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if dev > 1e-10 * scale {
                    return Err(Error::PotentialMismatch { at: x, deviation: dev });
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Same fields, different size parameter.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must be positive and finite, got {alpha}"
            )));
        }
        Ok(SystemSpec {
            alpha,
            ..self.clone()
        })
    }

    pub fn potential(&self) -> Option<&Poly> {
        self.potential.as_ref()
    }

    pub fn linear(&self) -> Option<&DMatrix<f64>> {
        self.linear.as_ref()
    }

    pub fn diffusion_field(&self) -> &DiffusionField {
        &self.diffusion
    }

    /// Constant diffusion matrix, if the field is constant.
    pub fn constant_diffusion(&self) -> Option<&DMatrix<f64>> {
        match &self.diffusion {
            DiffusionField::Constant(d) => Some(d),
            DiffusionField::Diagonal(_) => None,
        }
    }

    /// True when `D(x)` has no off-diagonal entries anywhere.
    pub fn has_diagonal_diffusion(&self) -> bool {
        match &self.diffusion {
            DiffusionField::Diagonal(_) => true,
            DiffusionField::Constant(d) => {
                (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || d[(i, j)] == 0.0))
            }
        }
    }

    /// `b(x)` without validation.
    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        self.drift.iter().map(|p| p.eval(x)).collect()
    }

    /// `b(x)`, checking arity and finiteness.
    pub fn eval_drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_arity(x)?;
        let b = self.drift(x);
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { at: x.to_vec() });
        }
        Ok(b)
    }

    /// Single component `b_axis(x)`.
    pub fn drift_component(&self, axis: usize, x: &[f64]) -> f64 {
        self.drift[axis].eval(x)
    }

    /// Analytic Jacobian `J_ij = d b_i / d x_j`.
    pub fn drift_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.drift[i].partial(j).eval(x))
    }

    /// Analytic divergence of the drift.
    pub fn drift_divergence(&self, x: &[f64]) -> f64 {
        (0..self.dim).map(|i| self.drift[i].partial(i).eval(x)).sum()
    }

    /// `D(x)` without validation.
    pub fn diffusion(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.diffusion {
            DiffusionField::Constant(d) => d.clone(),
            DiffusionField::Diagonal(ps) => {
                let diag = nalgebra::DVector::from_iterator(self.dim, ps.iter().map(|p| p.eval(x)));
                DMatrix::from_diagonal(&diag)
            }
        }
    }

    /// Diagonal entry `D_axis,axis(x)`.
    pub fn diffusion_diag(&self, axis: usize, x: &[f64]) -> f64 {
        match &self.diffusion {
            DiffusionField::Constant(d) => d[(axis, axis)],
            DiffusionField::Diagonal(ps) => ps[axis].eval(x),
        }
    }

    /// `D(x)`, checking symmetry and positive definiteness.
    pub fn eval_diffusion(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_arity(x)?;
        let d = self.diffusion(x);
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { at: x.to_vec() });
        }
        let symmetric = (0..self.dim).all(|i| (0..i).all(|j| d[(i, j)] == d[(j, i)]));
        if !symmetric || d.clone().cholesky().is_none() {
            return Err(Error::NotSpd { at: x.to_vec() });
        }
        Ok(d)
    }

    pub fn potential_value(&self, x: &[f64]) -> Option<f64> {
        self.potential.as_ref().map(|u| u.eval(x))
    }

    pub fn potential_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.potential
            .as_ref()
            .map(|u| (0..self.dim).map(|k| u.partial(k).eval(x)).collect())
    }

    /// `max_i |b_i + (D grad U)_i|`; infinite when no potential is attached.
    pub fn gradient_deviation(&self, x: &[f64]) -> f64 {
        let Some(g) = self.potential_gradient(x) else {
            return f64::INFINITY;
        };
        let d = self.diffusion(x);
        let b = self.drift(x);
        (0..self.dim)
            .map(|i| {
                let dg: f64 = (0..self.dim).map(|j| d[(i, j)] * g[j]).sum();
                (b[i] + dg).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Whether the drift is a gradient field `b = -D grad U`: true when a
    /// potential is attached, or for linear drift with `D^-1 B` symmetric.
    pub fn is_gradient(&self) -> bool {
        if self.potential.is_some() {
            return true;
        }
        match (&self.linear, self.constant_diffusion()) {
            (Some(b), Some(d)) => match d.clone().try_inverse() {
                Some(di) => {
                    let s = di * b;
                    (&s - s.transpose()).amax() <= 1e-12 * (1.0 + s.amax())
                }
                None => false,
            },
            _ => false,
        }
    }

    fn check_arity(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "state has length {}, system dimension is {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// Deterministic probe set on `[-3, 3]^N`: 100 points in 1D, a 10x10 lattice
/// in 2D, and the corners plus center of the cube beyond.
pub(crate) fn probe_points(dim: usize) -> Vec<Vec<f64>> {
    let axis = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|k| -3.0 + 6.0 * k as f64 / (n - 1) as f64)
            .collect()
    };
    match dim {
        1 => axis(100).into_iter().map(|x| vec![x]).collect(),
        2 => {
            let a = axis(10);
            a.iter()
                .flat_map(|&x| a.iter().map(move |&y| vec![x, y]))
                .collect()
        }
        n => {
            let mut pts = vec![vec![0.0; n]];
            for mask in 0..(1usize << n.min(10)) {
                pts.push((0..n).map(|k| if mask >> k & 1 == 1 { 1.5 } else { -1.5 }).collect());
            }
            pts
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(name: &str) -> SystemSpec {
        catalog(name, &CatalogParams::default()).unwrap().spec
    }

    #[test]
    fn drift_examples() {
        let ou = entry("ou1d");
        assert_eq!(ou.eval_drift(&[2.0]).unwrap(), vec![-2.0]);
        let dw = entry("double_well");
        assert_eq!(dw.eval_drift(&[1.0]).unwrap(), vec![0.0]);
        let rot = entry("rot_ou");
        assert_eq!(rot.eval_drift(&[1.0, 0.0]).unwrap(), vec![-1.0, -1.0]);
    }

    #[test]
    fn diffusion_examples() {
        let ou = entry("ou1d");
        assert_eq!(ou.eval_diffusion(&[0.3]).unwrap()[(0, 0)], 1.0);
        let rot = entry("rot_ou");
        assert_eq!(rot.eval_diffusion(&[0.1, -2.0]).unwrap(), DMatrix::identity(2, 2));
        let vd = entry("var_diff_1d");
        assert_eq!(vd.eval_diffusion(&[2.0]).unwrap()[(0, 0)], 3.0);
    }

    #[test]
    fn wrong_arity_is_rejected() {
        let ou = entry("ou1d");
        assert!(ou.eval_drift(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn gradient_flags() {
        assert!(entry("ou1d").is_gradient());
        assert!(entry("double_well").is_gradient());
        assert!(!entry("rot_ou").is_gradient());
    }

    #[test]
    fn non_spd_diffusion_rejected() {
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = SystemSpec::new(
            "bad",
            1.0,
            vec![Poly::zero(2), Poly::zero(2)],
            DiffusionField::Constant(d),
            None,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotSpd { .. }));
    }

    #[test]
    fn inconsistent_potential_rejected() {
        // b = -x but U = x^2 (would need b = -2x)
        let err = SystemSpec::new(
            "bad",
            1.0,
            vec![Poly::univariate(&[0.0, -1.0])],
            DiffusionField::Constant(DMatrix::identity(1, 1)),
            Some(Poly::univariate(&[0.0, 0.0, 1.0])),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::PotentialMismatch { .. }));
    }

    #[test]
    fn every_potential_entry_generates_its_drift() {
        for name in catalog_names() {
            let spec = entry(name);
            if spec.potential().is_none() {
                continue;
            }
            for x in probe_points(spec.dim()) {
                assert!(spec.gradient_deviation(&x) < 1e-10, "{name} at {x:?}");
            }
        }
    }

    #[test]
    fn diffusion_is_bitwise_symmetric() {
        for name in catalog_names() {
            let spec = entry(name);
            for x in probe_points(spec.dim()) {
                let d = spec.diffusion(&x);
                assert_eq!(d, d.transpose(), "{name}");
            }
        }
    }

    #[test]
    fn jacobian_and_divergence_are_analytic() {
        let dw = entry("double_well");
        assert_eq!(dw.drift_jacobian(&[2.0])[(0, 0)], 1.0 - 12.0);
        assert_eq!(dw.drift_divergence(&[0.0]), 1.0);
        let rot = entry("rot_ou");
        assert_eq!(rot.drift_divergence(&[5.0, 7.0]), -2.0);
    }
}

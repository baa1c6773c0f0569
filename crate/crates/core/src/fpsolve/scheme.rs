//! Exponentially fitted (Chang-Cooper / Scharfetter-Gummel) face fluxes.
//!
//! Across the face between cells `l` and `r` along one axis the probability
//! flux `J = b f - (D / alpha) df/dx` is approximated by
//!
//! ```text
//! J = (d / h) [ B(-w) f_l - B(w) f_r ],   B(z) = z / (e^z - 1),
//! ```
//!
//! with `d = D_aa(x_face) / alpha` and Peclet number `w`. When the system
//! carries a potential, `w = -alpha (U_r - U_l)`, which makes the cell-sampled
//! Gibbs density `exp(-alpha U)` an exact zero-flux state of the scheme.
//! Otherwise `w = b_a(x_face) h / d`.
//!
//! Since `B(-w) = e^w B(w)`, `J` has the sign of `w - ln(f_r / f_l)`. The
//! thermodynamic functionals in `thermo` are built on this pairing.

use super::{DensityField, Grid};
use crate::error::{Error, Result};
use crate::model::SystemSpec;

/// Bernoulli function `z / (e^z - 1)`.
pub fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

/// One interior face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Face {
    pub left: usize,
    pub right: usize,
    pub axis: usize,
    /// `d / h`.
    pub conductance: f64,
    /// Peclet number.
    pub peclet: f64,
    /// `B(-w)`, weight on the left cell.
    pub b_minus: f64,
    /// `B(w)`, weight on the right cell.
    pub b_plus: f64,
    /// Cell volume over `h` along the face normal.
    pub area: f64,
}

impl Face {
    #[inline]
    pub fn flux(&self, f: &[f64]) -> f64 {
        self.conductance * (self.b_minus * f[self.left] - self.b_plus * f[self.right])
    }
}

/// Face set for one system on one grid.
#[derive(Clone, Debug)]
pub struct Discretization {
    grid: Grid,
    faces: Vec<Face>,
}

impl Discretization {
    pub fn new(spec: &SystemSpec, grid: &Grid) -> Result<Self> {
        if spec.dim() != grid.dim() {
            return Err(Error::InvalidInput(format!(
                "system dimension {} does not match grid dimension {}",
                spec.dim(),
                grid.dim()
            )));
        }
        if spec.dim() > 2 {
            return Err(Error::Unsupported("grid solves are limited to 1 or 2 dimensions".into()));
        }
        if !spec.has_diagonal_diffusion() {
            return Err(Error::Unsupported(
                "grid solves need a diagonal diffusion tensor".into(),
            ));
        }
        let alpha = spec.alpha();
        let vol = grid.cell_volume();
        let mut faces = Vec::new();
        for axis in 0..grid.dim() {
            let h = grid.h(axis);
            let stride = grid.stride(axis);
            for left in 0..grid.len() {
                let i = grid.unravel(left);
                if i[axis] + 1 >= grid.cells()[axis] {
                    continue;
                }
                let right = left + stride;
                let xl = grid.center(left);
                let xr = grid.center(right);
                let xf: Vec<f64> = xl.iter().zip(&xr).map(|(a, b)| 0.5 * (a + b)).collect();
                let dfa = spec.diffusion_diag(axis, &xf);
                if !(dfa > 0.0) || !dfa.is_finite() {
                    return Err(Error::NotSpd { at: xf });
                }
                let d = dfa / alpha;
                let peclet = match spec.potential() {
                    Some(u) => -alpha * (u.eval(&xr) - u.eval(&xl)),
                    None => spec.drift_component(axis, &xf) * h / d,
                };
                if !peclet.is_finite() {
                    return Err(Error::NonFinite { at: xf });
                }
                faces.push(Face {
                    left,
                    right,
                    axis,
                    conductance: d / h,
                    peclet,
                    b_minus: bernoulli(-peclet),
                    b_plus: bernoulli(peclet),
                    area: vol / h,
                });
            }
        }
        Ok(Discretization {
            grid: grid.clone(),
            faces,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Half bandwidth of the generator in flat indexing.
    pub fn bandwidth(&self) -> usize {
        (0..self.grid.dim()).map(|a| self.grid.stride(a)).max().unwrap_or(1)
    }

    /// `(L f)_k = -(1/vol) sum_faces area * (+-J)`, the semi-discrete rate.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let vol = self.grid.cell_volume();
        let mut out = vec![0.0; f.len()];
        for face in &self.faces {
            let j = face.flux(f) * face.area / vol;
            out[face.left] -= j;
            out[face.right] += j;
        }
        out
    }

    /// Entry contributions `(row, col, value)` of the generator `L`.
    pub(crate) fn generator_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let vol = self.grid.cell_volume();
        self.faces.iter().flat_map(move |face| {
            let g = face.conductance * face.area / vol;
            let (l, r) = (face.left, face.right);
            [
                (l, l, -g * face.b_minus),
                (l, r, g * face.b_plus),
                (r, l, g * face.b_minus),
                (r, r, -g * face.b_plus),
            ]
        })
    }
}

/// Probability flux through one face, boundary faces included.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceFlux {
    pub axis: usize,
    /// Cell on the lower side; `None` on the lower boundary.
    pub left: Option<usize>,
    /// Cell on the upper side; `None` on the upper boundary.
    pub right: Option<usize>,
    /// Position of the face center.
    pub position: [f64; 2],
    pub value: f64,
}

/// Probability flux `J = b f - (D/alpha) grad f` on every face. Boundary
/// faces carry exactly zero (reflecting walls).
pub fn flux(spec: &SystemSpec, density: &DensityField) -> Result<Vec<FaceFlux>> {
    let disc = Discretization::new(spec, density.grid())?;
    let grid = density.grid();
    let f = density.values();
    let mut out = Vec::new();
    let face_pos = |axis: usize, cell: usize, upper: bool| -> [f64; 2] {
        let mut x = grid.center(cell);
        let h = grid.h(axis);
        x[axis] += if upper { 0.5 * h } else { -0.5 * h };
        [x[0], x.get(1).copied().unwrap_or(0.0)]
    };
    for axis in 0..grid.dim() {
        for cell in 0..grid.len() {
            let i = grid.unravel(cell);
            if i[axis] == 0 {
                out.push(FaceFlux {
                    axis,
                    left: None,
                    right: Some(cell),
                    position: face_pos(axis, cell, false),
                    value: 0.0,
                });
            }
            if i[axis] + 1 == grid.cells()[axis] {
                out.push(FaceFlux {
                    axis,
                    left: Some(cell),
                    right: None,
                    position: face_pos(axis, cell, true),
                    value: 0.0,
                });
            }
        }
    }
    for face in disc.faces() {
        out.push(FaceFlux {
            axis: face.axis,
            left: Some(face.left),
            right: Some(face.right),
            position: face_pos(face.axis, face.left, true),
            value: face.flux(f),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{init_density, make_grid, InitialCondition};
    use super::*;
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
    fn bernoulli_limits() {
        assert_eq!(bernoulli(0.0), 1.0);
        assert!((bernoulli(1e-9) - (1.0 - 5e-10)).abs() < 1e-16);
        assert!((bernoulli(-2.0) - 2.0_f64.exp() * bernoulli(2.0)).abs() < 1e-14);
        assert!(bernoulli(800.0) >= 0.0);
        assert!((bernoulli(-800.0) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn generator_columns_sum_to_zero() {
        let s = spec("rot_ou", 2.0);
        let g = make_grid(&[(-2.0, 2.0), (-2.0, 2.0)], &[10, 12]).unwrap();
        let disc = Discretization::new(&s, &g).unwrap();
        let mut col = vec![0.0; g.len()];
        for (_, c, v) in disc.generator_entries() {
            col[c] += v;
        }
        assert!(col.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn uniform_density_without_drift_has_no_flux() {
        let s = spec("pure_diffusion", 3.0);
        let g = make_grid(&[(0.0, 1.0)], &[50]).unwrap();
        let f = init_density(&g, &InitialCondition::Uniform).unwrap();
        assert!(flux(&s, &f).unwrap().iter().all(|j| j.value == 0.0));
    }

    #[test]
    fn gibbs_density_has_zero_flux() {
        let s = spec("double_well", 20.0);
        let g = make_grid(&[(-3.0, 3.0)], &[600]).unwrap();
        let u = s.potential().unwrap();
        let vals: Vec<f64> = g.centers().iter().map(|x| (-20.0 * u.eval(x)).exp()).collect();
        let f = DensityField::from_values(g, vals, 0.0).unwrap();
        let js = flux(&s, &f).unwrap();
        assert_eq!(js.len(), 601);
        assert!(js.iter().all(|j| j.value.abs() < 1e-12));
    }

    #[test]
    fn boundary_faces_are_zero() {
        let s = spec("rot_ou", 1.0);
        let g = make_grid(&[(-4.0, 4.0), (-4.0, 4.0)], &[16, 16]).unwrap();
        let f = init_density(
            &g,
            &InitialCondition::Gaussian {
                mean: vec![0.5, 0.0],
                cov: nalgebra::DMatrix::identity(2, 2) * 0.3,
            },
        )
        .unwrap();
        let js = flux(&s, &f).unwrap();
        // 17 faces per line, 16 lines, two axes
        assert_eq!(js.len(), 2 * 16 * 17);
        for j in js.iter().filter(|j| j.left.is_none() || j.right.is_none()) {
            assert_eq!(j.value, 0.0);
        }
    }
}

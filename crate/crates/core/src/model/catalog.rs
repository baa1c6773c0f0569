use nalgebra::DMatrix;

use super::{DiffusionField, Poly, SystemSpec};
use crate::error::{Error, Result};
use crate::ougauss::{OuSpec, stationary_covariance};

/// Optional overrides for catalog parameters.
#[derive(Clone, Debug, Default)]
pub struct CatalogParams {
    pub alpha: Option<f64>,
    pub b: Option<DMatrix<f64>>,
    pub d: Option<DMatrix<f64>>,
    pub omega: Option<f64>,
}

/// Closed-form facts about a catalog entry.
#[derive(Clone, Debug, Default)]
pub struct KnownQuantities {
    /// Stationary covariance `C_ss` of the law itself (already divided by alpha).
    pub stationary_cov: Option<DMatrix<f64>>,
    /// Stationary rate function, up to an additive constant.
    pub phi_ss: Option<Poly>,
    /// Detailed balance holds at stationarity.
    pub equilibrium: bool,
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub spec: SystemSpec,
    pub known: KnownQuantities,
}

const NAMES: [&str; 7] = [
    "ou1d",
    "ou",
    "double_well",
    "double_well_2d",
    "rot_ou",
    "var_diff_1d",
    "pure_diffusion",
];

pub fn catalog_names() -> &'static [&'static str] {
    &NAMES
}

pub fn catalog(name: &str, params: &CatalogParams) -> Result<CatalogEntry> {
    let alpha = params.alpha.unwrap_or(1.0);
    let Some(&name) = NAMES.iter().find(|&&n| n == name) else {
        return Err(Error::UnknownCatalog(name.to_string()));
    };
    match name {
        "ou1d" => {
            let b = scalar_param(params.b.as_ref(), -1.0, "B")?;
            let d = scalar_param(params.d.as_ref(), 1.0, "D")?;
            linear_entry(
                name,
                alpha,
                DMatrix::from_element(1, 1, b),
                DMatrix::from_element(1, 1, d),
            )
        }
        "ou" => {
            let b = params
                .b
                .clone()
                .unwrap_or_else(|| -DMatrix::<f64>::identity(2, 2));
            let d = params
                .d
                .clone()
                .unwrap_or_else(|| DMatrix::<f64>::identity(b.nrows(), b.nrows()));
            linear_entry(name, alpha, b, d)
        }
        "rot_ou" => {
            let w = params.omega.unwrap_or(1.0);
            let b = DMatrix::from_row_slice(2, 2, &[-1.0, w, -w, -1.0]);
            linear_entry(name, alpha, b, DMatrix::identity(2, 2))
        }
        "double_well" => {
            // U = (x^2 - 1)^2 / 4, b = x - x^3, D = 1
            let u = Poly::univariate(&[0.25, 0.0, -0.5, 0.0, 0.25]);
            let b = Poly::univariate(&[0.0, 1.0, 0.0, -1.0]);
            let spec = SystemSpec::new(
                name,
                alpha,
                vec![b],
                DiffusionField::Constant(DMatrix::identity(1, 1)),
                Some(u.clone()),
                None,
            )?;
            Ok(CatalogEntry {
                name,
                spec,
                known: KnownQuantities {
                    stationary_cov: None,
                    phi_ss: Some(u),
                    equilibrium: true,
                },
            })
        }
        "double_well_2d" => {
            // U = (x^2 - 1)^2 / 4 + y^2 / 2, D = I
            let u = Poly::zero(2)
                .with(0.25, &[0, 0])
                .with(-0.5, &[2, 0])
                .with(0.25, &[4, 0])
                .with(0.5, &[0, 2]);
            let bx = Poly::zero(2).with(1.0, &[1, 0]).with(-1.0, &[3, 0]);
            let by = Poly::zero(2).with(-1.0, &[0, 1]);
            let spec = SystemSpec::new(
                name,
                alpha,
                vec![bx, by],
                DiffusionField::Constant(DMatrix::identity(2, 2)),
                Some(u.clone()),
                None,
            )?;
            Ok(CatalogEntry {
                name,
                spec,
                known: KnownQuantities {
                    stationary_cov: None,
                    phi_ss: Some(u),
                    equilibrium: true,
                },
            })
        }
        "var_diff_1d" => {
            // D(x) = 1 + x^2/2, U = x^2/2, b = -D U' = -x - x^3/2
            let dpoly = Poly::univariate(&[1.0, 0.0, 0.5]);
            let u = Poly::univariate(&[0.0, 0.0, 0.5]);
            let b = Poly::univariate(&[0.0, -1.0, 0.0, -0.5]);
            let spec = SystemSpec::new(
                name,
                alpha,
                vec![b],
                DiffusionField::Diagonal(vec![dpoly]),
                Some(u.clone()),
                None,
            )?;
            Ok(CatalogEntry {
                name,
                spec,
                known: KnownQuantities {
                    stationary_cov: None,
                    phi_ss: Some(u),
                    equilibrium: true,
                },
            })
        }
        "pure_diffusion" => {
            let d = params
                .d
                .clone()
                .unwrap_or_else(|| DMatrix::identity(1, 1));
            let n = d.nrows();
            let spec = SystemSpec::new(
                name,
                alpha,
                vec![Poly::zero(n); n],
                DiffusionField::Constant(d),
                Some(Poly::zero(n)),
                Some(DMatrix::zeros(n, n)),
            )?;
            Ok(CatalogEntry {
                name,
                spec,
                known: KnownQuantities {
                    stationary_cov: None,
                    phi_ss: None,
                    equilibrium: true,
                },
            })
        }
        _ => unreachable!("name list and match arms out of sync"),
    }
}

fn scalar_param(m: Option<&DMatrix<f64>>, default: f64, key: &str) -> Result<f64> {
    match m {
        None => Ok(default),
        Some(m) if m.nrows() == 1 && m.ncols() == 1 => Ok(m[(0, 0)]),
        Some(_) => Err(Error::InvalidInput(format!("`{key}` must be a scalar for ou1d"))),
    }
}

/// Ornstein-Uhlenbeck entry `b = B x`, constant `D`. A potential is attached
/// when `D^-1 B` is symmetric, and the stationary law when `B` is Hurwitz.
fn linear_entry(
    name: &'static str,
    alpha: f64,
    b: DMatrix<f64>,
    d: DMatrix<f64>,
) -> Result<CatalogEntry> {
    let n = b.nrows();
    if b.ncols() != n || d.nrows() != n || d.ncols() != n {
        return Err(Error::InvalidInput("B and D must be square and of equal size".into()));
    }
    let drift: Vec<Poly> = (0..n)
        .map(|i| Poly::linear(&b.row(i).iter().copied().collect::<Vec<_>>()))
        .collect();
    let d_inv = d
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotSpd { at: vec![0.0; n] })?;
    let s = &d_inv * &b;
    let symmetric = (&s - s.transpose()).amax() <= 1e-14 * (1.0 + s.amax());
    let potential = symmetric.then(|| quadratic_form(&(-0.5 * (&s + s.transpose()) * 0.5)));
    let spec = SystemSpec::new(
        name,
        alpha,
        drift,
        DiffusionField::Constant(d.clone()),
        potential,
        Some(b.clone()),
    )?;
    let ou = OuSpec::new(b, d, alpha)?;
    let stationary_cov = ou.is_hurwitz().then(|| stationary_covariance(&ou)).transpose()?;
    let phi_ss = stationary_cov.as_ref().and_then(|c| {
        (c * alpha)
            .try_inverse()
            .map(|h| quadratic_form(&(0.5 * (&h + h.transpose()) * 0.5)))
    });
    Ok(CatalogEntry {
        name,
        spec,
        known: KnownQuantities {
            stationary_cov,
            phi_ss,
            equilibrium: symmetric,
        },
    })
}

/// `x^T A x` as a polynomial.
fn quadratic_form(a: &DMatrix<f64>) -> Poly {
    let n = a.nrows();
    let mut p = Poly::zero(n);
    for i in 0..n {
        for j in 0..n {
            let mut pw = vec![0u32; n];
            pw[i] += 1;
            pw[j] += 1;
            p = p.with(a[(i, j)], &pw);
        }
    }
    p
}

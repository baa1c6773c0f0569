use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{catalog, CatalogParams, DiffusionField, Poly, SystemSpec, Term};
use crate::error::{Error, Result};

/// Scalar or nested-list matrix parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixParam {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl MatrixParam {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        match self {
            MatrixParam::Scalar(v) => Ok(DMatrix::from_element(1, 1, *v)),
            MatrixParam::Matrix(rows) => {
                let n = rows.len();
                let m = rows.first().map_or(0, Vec::len);
                if n == 0 || rows.iter().any(|r| r.len() != m) {
                    return Err(Error::Config("matrix rows must be non-empty and equal length".into()));
                }
                Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
            }
        }
    }
}

/// A monomial written as `[coef, p1, p2, ...]`.
pub type TermConfig = Vec<f64>;

/// The `[system]` table: either a catalog name with optional parameters, or
/// user-defined polynomial fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub catalog: Option<String>,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub b: Option<MatrixParam>,
    #[serde(rename = "D")]
    pub d: Option<MatrixParam>,
    pub omega: Option<f64>,
    pub dim: Option<usize>,
    /// One list of monomials per drift component.
    pub drift: Option<Vec<Vec<TermConfig>>>,
    /// One list of monomials per diagonal diffusion entry.
    pub diffusion_diag: Option<Vec<Vec<TermConfig>>>,
    /// Monomials of `U`; asserts `b = -D grad U`.
    pub potential: Option<Vec<TermConfig>>,
}

/// Build a validated system from its configuration.
pub fn build_system(config: &SystemConfig) -> Result<SystemSpec> {
    if let Some(name) = &config.catalog {
        if config.drift.is_some() || config.diffusion_diag.is_some() || config.potential.is_some() {
            return Err(Error::Config(
                "catalog systems take parameters B, D, omega only".into(),
            ));
        }
        let params = CatalogParams {
            alpha: Some(config.alpha),
            b: config.b.as_ref().map(MatrixParam::to_matrix).transpose()?,
            d: config.d.as_ref().map(MatrixParam::to_matrix).transpose()?,
            omega: config.omega,
        };
        return Ok(catalog(name, &params)?.spec);
    }

    let dim = config
        .dim
        .ok_or_else(|| Error::Config("custom system needs `dim`".into()))?;
    if !(1..=2).contains(&dim) {
        return Err(Error::Config(format!("dim must be 1 or 2, got {dim}")));
    }
    let drift_cfg = config
        .drift
        .as_ref()
        .ok_or_else(|| Error::Config("custom system needs `drift`".into()))?;
    if drift_cfg.len() != dim {
        return Err(Error::Config(format!(
            "`drift` has {} components, expected {dim}",
            drift_cfg.len()
        )));
    }
    let drift = drift_cfg
        .iter()
        .map(|terms| poly_from_terms(dim, terms, "drift"))
        .collect::<Result<Vec<_>>>()?;
    let diffusion = match (&config.d, &config.diffusion_diag) {
        (Some(_), Some(_)) => {
            return Err(Error::Config("give either `D` or `diffusion_diag`, not both".into()))
        }
        (Some(d), None) => {
            let d = d.to_matrix()?;
            if d.nrows() != dim || d.ncols() != dim {
                return Err(Error::Config(format!("`D` must be {dim}x{dim}")));
            }
            DiffusionField::Constant(d)
        }
        (None, Some(diag)) => {
            if diag.len() != dim {
                return Err(Error::Config(format!("`diffusion_diag` needs {dim} entries")));
            }
            DiffusionField::Diagonal(
                diag.iter()
                    .map(|t| poly_from_terms(dim, t, "diffusion_diag"))
                    .collect::<Result<_>>()?,
            )
        }
        (None, None) => return Err(Error::Config("custom system needs `D` or `diffusion_diag`".into())),
    };
    let potential = config
        .potential
        .as_ref()
        .map(|t| poly_from_terms(dim, t, "potential"))
        .transpose()?;
    let linear = match &diffusion {
        DiffusionField::Constant(_) if drift.iter().all(is_homogeneous_linear) => {
            Some(DMatrix::from_fn(dim, dim, |i, j| {
                drift[i].partial(j).eval(&vec![0.0; dim])
            }))
        }
        _ => None,
    };
    SystemSpec::new("custom", config.alpha, drift, diffusion, potential, linear)
}

fn is_homogeneous_linear(p: &Poly) -> bool {
    p.terms()
        .iter()
        .all(|t| t.powers.iter().sum::<u32>() == 1)
}

fn poly_from_terms(dim: usize, terms: &[TermConfig], key: &str) -> Result<Poly> {
    let terms = terms
        .iter()
        .map(|t| {
            if t.len() != dim + 1 {
                return Err(Error::Config(format!(
                    "`{key}` monomials are [coef, {} powers]",
                    dim
                )));
            }
            let powers = t[1..]
                .iter()
                .map(|&p| {
                    if p >= 0.0 && p.fract() == 0.0 && p <= 32.0 {
                        Ok(p as u32)
                    } else {
                        Err(Error::Config(format!("`{key}` powers must be small non-negative integers")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Term {
                coef: t[0],
                powers,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Poly::from_terms(dim, terms))
}

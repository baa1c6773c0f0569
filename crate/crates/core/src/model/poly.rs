use serde::{Deserialize, Serialize};

/// One monomial `coef * x_1^e_1 * ... * x_N^e_N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Multivariate polynomial with exact derivatives.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    dim: usize,
    terms: Vec<Term>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Poly {
            dim,
            terms: Vec::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Poly::zero(dim).with(c, &vec![0; dim])
    }

    /// Builder-style term insertion; `powers` must have length `dim`.
    pub fn with(mut self, coef: f64, powers: &[u32]) -> Self {
        assert_eq!(powers.len(), self.dim, "monomial arity");
        if coef != 0.0 {
            self.terms.push(Term {
                coef,
                powers: powers.to_vec(),
            });
        }
        self
    }

    /// Linear form `sum_j row[j] * x_j`.
    pub fn linear(row: &[f64]) -> Self {
        let dim = row.len();
        row.iter().enumerate().fold(Poly::zero(dim), |p, (j, &c)| {
            let mut pw = vec![0; dim];
            pw[j] = 1;
            p.with(c, &pw)
        })
    }

    /// Univariate polynomial from ascending coefficients `c0 + c1 x + ...`.
    pub fn univariate(coefs: &[f64]) -> Self {
        coefs
            .iter()
            .enumerate()
            .fold(Poly::zero(1), |p, (k, &c)| p.with(c, &[k as u32]))
    }

    pub fn from_terms(dim: usize, terms: Vec<Term>) -> Self {
        Poly { dim, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.terms
            .iter()
            .map(|t| {
                t.powers
                    .iter()
                    .zip(x)
                    .fold(t.coef, |acc, (&e, &xi)| acc * xi.powi(e as i32))
            })
            .sum()
    }

    pub fn partial(&self, axis: usize) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.powers[axis] > 0)
            .map(|t| {
                let mut powers = t.powers.clone();
                let e = powers[axis];
                powers[axis] -= 1;
                Term {
                    coef: t.coef * e as f64,
                    powers,
                }
            })
            .collect();
        Poly {
            dim: self.dim,
            terms,
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.powers.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coef == 0.0)
    }
}

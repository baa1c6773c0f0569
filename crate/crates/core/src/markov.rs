//! One step of a finite Markov chain: entropy generated along paths, change
//! of the state entropy, and the folding entropy `H(X_t | X_{t+1})` that
//! closes the gap between them. Natural logarithms; `0 ln 0 = 0`.

use crate::error::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct MarkovChain {
    p: Vec<f64>,
    /// Row-major `N x N` transition matrix.
    transition: Vec<f64>,
}

impl MarkovChain {
    pub fn new(p: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let n = p.len();
        if n == 0 {
            return Err(Error::InvalidInput("chain needs at least one state".into()));
        }
        check_distribution(&p, "initial distribution")?;
        if transition.len() != n || transition.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput(format!("transition matrix must be {n}x{n}")));
        }
        for (i, row) in transition.iter().enumerate() {
            check_distribution(row, &format!("transition row {i}"))?;
        }
        Ok(MarkovChain {
            p,
            transition: transition.concat(),
        })
    }

    pub fn states(&self) -> usize {
        self.p.len()
    }

    pub fn distribution(&self) -> &[f64] {
        &self.p
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.transition[i * self.p.len() + j]
    }
}

fn check_distribution(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidInput(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidInput(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

fn shannon(v: &[f64]) -> f64 {
    -v.iter().map(|&x| xlnx(x)).sum::<f64>()
}

/// `p(t+1) = p P`.
pub fn step_distribution(chain: &MarkovChain) -> Vec<f64> {
    let n = chain.states();
    (0..n)
        .map(|j| (0..n).map(|i| chain.p[i] * chain.prob(i, j)).sum())
        .collect()
}

/// `-sum_ij p_i P_ij ln P_ij`.
pub fn mean_entropy_generated(chain: &MarkovChain) -> f64 {
    let n = chain.states();
    -(0..n)
        .map(|i| chain.p[i] * (0..n).map(|j| xlnx(chain.prob(i, j))).sum::<f64>())
        .sum::<f64>()
}

/// `H(p(t+1)) - H(p(t))`.
pub fn mean_entropy_change(chain: &MarkovChain) -> f64 {
    shannon(&step_distribution(chain)) - shannon(&chain.p)
}

/// Mean of `-ln Pr{X_t = i | X_{t+1} = j}` under the joint law `p_i P_ij`.
/// Columns that receive no mass are skipped.
pub fn folding_entropy(chain: &MarkovChain) -> f64 {
    let n = chain.states();
    let next = step_distribution(chain);
    let mut acc = 0.0;
    for (j, &q) in next.iter().enumerate() {
        if q <= 0.0 {
            continue;
        }
        for i in 0..n {
            let joint = chain.p[i] * chain.prob(i, j);
            if joint > 0.0 {
                acc -= joint * (joint / q).ln();
            }
        }
    }
    acc
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decomposition {
    pub generated: f64,
    pub change: f64,
    pub folding: f64,
    /// `generated - change - folding`.
    pub residual: f64,
}

pub fn decomposition_check(chain: &MarkovChain) -> Decomposition {
    let generated = mean_entropy_generated(chain);
    let change = mean_entropy_change(chain);
    let folding = folding_entropy(chain);
    Decomposition {
        generated,
        change,
        folding,
        residual: generated - change - folding,
    }
}

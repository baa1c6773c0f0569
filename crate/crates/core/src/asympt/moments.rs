use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Fourth moments `E[y_i y_j y_k y_l]` of a centered Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct FourthMomentTensor {
    n: usize,
    sigma: DMatrix<f64>,
    entries: Vec<f64>,
}

impl FourthMomentTensor {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.entries[((i * n + j) * n + k) * n + l]
    }

    /// Entries in `i, j, k, l` order, last index fastest.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Isserlis: `S_ij S_kl + S_ik S_jl + S_il S_jk`. Each entry is evaluated on
/// its sorted index tuple so the tensor is symmetric to the last bit.
pub fn gaussian_fourth_moment(sigma: &DMatrix<f64>) -> Result<FourthMomentTensor> {
    let n = sigma.nrows();
    if n == 0 || sigma.ncols() != n {
        return Err(Error::InvalidInput("sigma must be square".into()));
    }
    if (sigma - sigma.transpose()).amax() > 1e-12 * sigma.amax() || sigma.clone().cholesky().is_none() {
        return Err(Error::NotSpd { at: vec![] });
    }
    let s = |a: usize, b: usize| sigma[(a.min(b), a.max(b))];
    let mut entries = Vec::with_capacity(n.pow(4));
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut q = [i, j, k, l];
                    q.sort_unstable();
                    let [i, j, k, l] = q;
                    entries.push(s(i, j) * s(k, l) + s(i, k) * s(j, l) + s(i, l) * s(j, k));
                }
            }
        }
    }
    Ok(FourthMomentTensor {
        n,
        sigma: sigma.clone(),
        entries,
    })
}

/// Entropy rate `D / sigma^2` of free Brownian motion with variance `sigma^2`.
pub fn brownian_entropy_rate(d: f64, var: f64) -> Result<f64> {
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::InvalidInput(format!("variance must be positive, got {var}")));
    }
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::InvalidInput(format!("diffusion must be non-negative, got {d}")));
    }
    Ok(d / var)
}

//! Banded LU without pivoting.
//!
//! The implicit operators `I - dt L` assembled from the fitted fluxes are
//! strictly column diagonally dominant M-matrices, for which elimination
//! without pivoting is stable and keeps every factor entry sign-definite. The
//! triangular solves therefore map non-negative right-hand sides to
//! non-negative solutions in floating point.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    /// Row `i`, column `j` stored at `i * (2 bw + 1) + (j + bw - i)`.
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandMatrix {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        }
    }

    pub fn identity(n: usize, bw: usize) -> Self {
        let mut m = BandMatrix::zeros(n, bw);
        for i in 0..n {
            *m.at_mut(i, i) = 1.0;
        }
        m
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.offset(i, j)]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let o = self.offset(i, j);
        &mut self.data[o]
    }

    pub fn factor(mut self) -> Result<BandLu> {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let pivot = self.at(k, k);
            if !(pivot.abs() > 0.0) || !pivot.is_finite() {
                return Err(Error::Singular(format!("zero pivot in row {k}")));
            }
            let last = (k + bw).min(n - 1);
            for i in k + 1..=last {
                let l = self.at(i, k) / pivot;
                if l == 0.0 {
                    continue;
                }
                *self.at_mut(i, k) = l;
                let (row_k, row_i) = (self.offset(k, k), self.offset(i, k));
                for s in 1..=(last - k) {
                    self.data[row_i + s] -= l * self.data[row_k + s];
                }
            }
        }
        Ok(BandLu { m: self })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu {
    m: BandMatrix,
}

impl BandLu {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.m.n, self.m.bw);
        assert_eq!(x.len(), n);
        for i in 0..n {
            let first = i.saturating_sub(bw);
            let mut acc = x[i];
            for k in first..i {
                acc -= self.m.at(i, k) * x[k];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let last = (i + bw).min(n - 1);
            let mut acc = x[i];
            for j in i + 1..=last {
                acc -= self.m.at(i, j) * x[j];
            }
            x[i] = acc / self.m.at(i, i);
        }
    }
}

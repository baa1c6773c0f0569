use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::SystemSpec;

pub const MIN_PATHS: usize = 1000;
/// Paths per RNG stream. Fixed so results do not depend on the thread count.
const CHUNK: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleOptions {
    pub n_paths: usize,
    pub dt: f64,
    /// Sorted, positive, each a whole number of steps.
    pub output_times: Vec<f64>,
    pub seed: u64,
    pub escape_radius: f64,
}

impl EnsembleOptions {
    pub fn new(n_paths: usize, dt: f64, output_times: Vec<f64>, seed: u64) -> Self {
        EnsembleOptions {
            n_paths,
            dt,
            output_times,
            seed,
            escape_radius: 1e3,
        }
    }
}

/// Sample moments at one output time.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSnapshot {
    pub t: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Standard error of each mean component.
    pub mean_se: DVector<f64>,
    /// Standard error of each covariance entry.
    pub cov_se: DMatrix<f64>,
}

fn step_counts(opts: &EnsembleOptions) -> Result<Vec<usize>> {
    if !(opts.dt > 0.0) {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    if opts.output_times.is_empty() {
        return Err(Error::InvalidInput("no output times".into()));
    }
    let mut prev = 0;
    opts.output_times
        .iter()
        .map(|&t| {
            let r = t / opts.dt;
            let n = r.round();
            if !(t > 0.0) || (r - n).abs() > 1e-9 * r.max(1.0) || (n as usize) <= prev {
                return Err(Error::InvalidInput(format!(
                    "output time {t} is not an increasing multiple of dt = {}",
                    opts.dt
                )));
            }
            prev = n as usize;
            Ok(prev)
        })
        .collect()
}

/// Euler-Maruyama for `dX = b dt + sqrt(2 D / alpha) dW`. Output depends only
/// on the options, not on scheduling.
pub fn simulate_ensemble(
    spec: &SystemSpec,
    x0: &[f64],
    opts: &EnsembleOptions,
) -> Result<Vec<EnsembleSnapshot>> {
    if opts.n_paths < MIN_PATHS {
        return Err(Error::InvalidInput(format!(
            "ensemble needs at least {MIN_PATHS} paths, got {}",
            opts.n_paths
        )));
    }
    if x0.len() != spec.dim() {
        return Err(Error::InvalidInput("initial point has the wrong dimension".into()));
    }
    let steps = step_counts(opts)?;
    let n = spec.dim();
    let noise = (2.0 * opts.dt / spec.alpha()).sqrt();
    let fixed_factor = match spec.constant_diffusion() {
        Some(d) => Some(
            d.clone()
                .cholesky()
                .ok_or_else(|| Error::NotSpd { at: x0.to_vec() })?
                .l(),
        ),
        None => None,
    };
    let n_chunks = opts.n_paths.div_ceil(CHUNK);
    let n_out = steps.len();

    let run_chunk = |chunk: usize| -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(chunk as u64);
        let paths = CHUNK.min(opts.n_paths - chunk * CHUNK);
        // samples[(o * paths + p) * n + a]
        let mut samples = vec![0.0; n_out * paths * n];
        let mut xi = vec![0.0; n];
        for p in 0..paths {
            let mut x = x0.to_vec();
            let mut step = 0;
            for (o, &target) in steps.iter().enumerate() {
                while step < target {
                    for v in xi.iter_mut() {
                        *v = rng.sample(StandardNormal);
                    }
                    let b = spec.drift(&x);
                    match &fixed_factor {
                        Some(l) => {
                            for a in 0..n {
                                let kick: f64 = (0..=a).map(|c| l[(a, c)] * xi[c]).sum();
                                x[a] += b[a] * opts.dt + noise * kick;
                            }
                        }
                        None => {
                            for a in 0..n {
                                let d = spec.diffusion_diag(a, &x);
                                x[a] += b[a] * opts.dt + noise * d.max(0.0).sqrt() * xi[a];
                            }
                        }
                    }
                    step += 1;
                    let r2: f64 = x.iter().map(|v| v * v).sum();
                    if !(r2.sqrt() <= opts.escape_radius) {
                        return Err(Error::BlowUp { t: step as f64 * opts.dt });
                    }
                }
                samples[(o * paths + p) * n..(o * paths + p + 1) * n].copy_from_slice(&x);
            }
        }
        Ok(samples)
    };

    let chunks = (0..n_chunks)
        .into_par_iter()
        .map(run_chunk)
        .collect::<Result<Vec<_>>>()?;

    let total = opts.n_paths as f64;
    let mut out = Vec::with_capacity(n_out);
    for (o, &t) in opts.output_times.iter().enumerate() {
        let each = |f: &mut dyn FnMut(&[f64])| {
            for (c, data) in chunks.iter().enumerate() {
                let paths = CHUNK.min(opts.n_paths - c * CHUNK);
                for p in 0..paths {
                    f(&data[(o * paths + p) * n..(o * paths + p + 1) * n]);
                }
            }
        };
        let mut mean = DVector::<f64>::zeros(n);
        each(&mut |x| {
            for a in 0..n {
                mean[a] += x[a];
            }
        });
        mean /= total;
        let mut m2 = DMatrix::<f64>::zeros(n, n);
        let mut m4 = DMatrix::<f64>::zeros(n, n);
        each(&mut |x| {
            for i in 0..n {
                for j in 0..n {
                    let prod = (x[i] - mean[i]) * (x[j] - mean[j]);
                    m2[(i, j)] += prod;
                    m4[(i, j)] += prod * prod;
                }
            }
        });
        let cov = &m2 / (total - 1.0);
        let mean_se = DVector::from_fn(n, |a, _| (cov[(a, a)] / total).sqrt());
        let cov_se = DMatrix::from_fn(n, n, |i, j| {
            ((m4[(i, j)] / total - (m2[(i, j)] / total).powi(2)).max(0.0) / total).sqrt()
        });
        out.push(EnsembleSnapshot {
            t,
            mean,
            cov,
            mean_se,
            cov_se,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asympt::ode_flow;
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
    fn same_seed_same_output() {
        let s = spec("rot_ou", 10.0);
        let o = EnsembleOptions::new(3000, 1e-2, vec![0.5, 1.0], 7);
        let a = simulate_ensemble(&s, &[1.0, 0.0], &o).unwrap();
        let b = simulate_ensemble(&s, &[1.0, 0.0], &o).unwrap();
        assert_eq!(a, b);
        let c = simulate_ensemble(&s, &[1.0, 0.0], &EnsembleOptions { seed: 8, ..o }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn vanishing_noise_follows_the_flow() {
        let s = spec("double_well", 1e300);
        let o = EnsembleOptions::new(1000, 1e-4, vec![0.5, 1.0], 1);
        let snaps = simulate_ensemble(&s, &[0.3], &o).unwrap();
        let flow = ode_flow(&s, &[0.3], &[0.0, 0.5, 1.0]).unwrap();
        for (snap, p) in snaps.iter().zip(&flow[1..]) {
            assert!((snap.mean[0] - p.xhat[0]).abs() < 1e-4);
            assert!(snap.cov[(0, 0)] < 1e-20);
        }
    }

    #[test]
    fn bad_options_rejected() {
        let s = spec("ou1d", 10.0);
        assert!(simulate_ensemble(&s, &[1.0], &EnsembleOptions::new(10, 1e-3, vec![1.0], 0)).is_err());
        assert!(simulate_ensemble(&s, &[1.0], &EnsembleOptions::new(1000, 1e-3, vec![0.00105], 0)).is_err());
        assert!(simulate_ensemble(&s, &[1.0], &EnsembleOptions::new(1000, 1e-3, vec![0.5, 0.2], 0)).is_err());
    }

    #[test]
    fn escape_is_reported() {
        let s = crate::model::build_system(
            &toml::from_str("alpha = 1.0\ndim = 1\ndrift = [[[1.0, 3.0]]]\nD = 1.0").unwrap(),
        )
        .unwrap();
        let err = simulate_ensemble(&s, &[2.0], &EnsembleOptions::new(1000, 1e-2, vec![2.0], 0)).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }));
    }
}

//! Randomized invariants.

mod support;

use fpthermo::asympt::{gaussian_fourth_moment, landscape_point};
use fpthermo::fpsolve::{init_density, make_grid, FpSolver, InitialCondition, SolverOptions};
use fpthermo::markov::{decomposition_check, folding_entropy, mean_entropy_generated, MarkovChain};
use fpthermo::model::{catalog, catalog_names, CatalogParams};
use fpthermo::ougauss::{
    gaussian_entropy_rate, ou_entropy_production, ou_free_energy_and_qhk, ou_free_energy_rate,
    ou_heat_exchange, propagate, stationary_covariance, GaussianState, OuSpec,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn matrix(n: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| v[i * n + j])
}

/// Hurwitz `B = -(S S^T + 0.2 I) + (A - A^T)`, SPD `D`, SPD state covariance.
fn ou_case() -> impl Strategy<Value = (OuSpec, GaussianState)> {
    (1usize..=3)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(-1.0f64..1.0, n * n),
                prop::collection::vec(-1.0f64..1.0, n * n),
                prop::collection::vec(-1.0f64..1.0, n * n),
                prop::collection::vec(-1.0f64..1.0, n * n),
                prop::collection::vec(-2.0f64..2.0, n),
                0.5f64..50.0,
            )
        })
        .prop_map(|(n, s, a, l, m, mu, alpha)| {
            let s = matrix(n, &s);
            let a = matrix(n, &a);
            let b = -(&s * s.transpose() + DMatrix::identity(n, n) * 0.2) + (&a - a.transpose());
            let l = matrix(n, &l);
            let d = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
            let d = (&d + d.transpose()) * 0.5;
            let m = matrix(n, &m);
            let c = (&m * m.transpose() + DMatrix::identity(n, n) * 0.05) / alpha;
            let c = (&c + c.transpose()) * 0.5;
            (
                OuSpec::new(b, d, alpha).unwrap(),
                GaussianState::new(DVector::from_vec(mu), c).unwrap(),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_form_entropy_balance((ou, st) in ou_case()) {
        let r = gaussian_entropy_rate(&ou, &st);
        let res = r.trace_form - ou_entropy_production(&ou, &st) - ou_heat_exchange(&ou, &st);
        prop_assert!(res.abs() <= 1e-10, "residual {res:e}");
        prop_assert!((r.trace_form - r.flux_form).abs() <= 1e-10);
        prop_assert!(ou_entropy_production(&ou, &st) >= 0.0);
    }

    #[test]
    fn closed_form_free_energy_balance((ou, st) in ou_case(), t in 0.0f64..2.0) {
        let s = propagate(&ou, &st, t).unwrap();
        let (f, qhk) = ou_free_energy_and_qhk(&ou, &s).unwrap();
        let dfdt = ou_free_energy_rate(&ou, &s).unwrap();
        let res = dfdt + ou_entropy_production(&ou, &s) - qhk;
        prop_assert!(res.abs() <= 1e-10, "residual {res:e}");
        prop_assert!(f >= -1e-12 && qhk >= -1e-10 && dfdt <= 1e-10);
    }

    #[test]
    fn propagation_composes((ou, st) in ou_case(), t1 in 0.0f64..1.5, t2 in 0.0f64..1.5) {
        let direct = propagate(&ou, &st, t1 + t2).unwrap();
        let split = propagate(&ou, &propagate(&ou, &st, t1).unwrap(), t2).unwrap();
        prop_assert!((direct.mean() - split.mean()).amax() <= 1e-9);
        prop_assert!((direct.cov() - split.cov()).amax() <= 1e-9);
    }

    #[test]
    fn stationary_covariance_is_a_fixed_point((ou, _st) in ou_case()) {
        let cs = stationary_covariance(&ou).unwrap();
        let n = ou.dim();
        let t = 10.0 / ou.max_real_eigenvalue().abs();
        let s = propagate(&ou, &GaussianState::new(DVector::zeros(n), cs.clone()).unwrap(), t).unwrap();
        prop_assert!((s.cov() - &cs).amax() <= 1e-10 * cs.amax().max(1.0));
    }
}

/// Random chain with some exact zeros in `p` and in the rows.
fn chain_case() -> impl Strategy<Value = MarkovChain> {
    (2usize..=6)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.001f64..1.0], n),
                prop::collection::vec(prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.001f64..1.0], n), n),
                0..n,
            )
        })
        .prop_map(|(mut p, mut rows, k)| {
            if p.iter().all(|v| *v == 0.0) {
                p[k] = 1.0;
            }
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= s);
            for (i, r) in rows.iter_mut().enumerate() {
                if r.iter().all(|v| *v == 0.0) {
                    let len = r.len();
                    r[(i + k) % len] = 1.0;
                }
                let s: f64 = r.iter().sum();
                r.iter_mut().for_each(|v| *v /= s);
            }
            normalize_exactly(&mut p);
            rows.iter_mut().for_each(|r| normalize_exactly(r));
            MarkovChain::new(p, rows).unwrap()
        })
}

/// Push rounding drift into the largest entry so sums are within 1e-15.
fn normalize_exactly(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    let (k, _) = v.iter().enumerate().fold((0, 0.0), |a, (i, &x)| if x > a.1 { (i, x) } else { a });
    v[k] += 1.0 - s;
}

/// `H(X_t, X_t+1) - H(X_t)` by enumerating every one-step path.
fn path_enumeration_generated(c: &MarkovChain) -> f64 {
    let n = c.states();
    let p = c.distribution();
    let mut joint = 0.0;
    let mut marginal = 0.0;
    for i in 0..n {
        if p[i] > 0.0 {
            marginal -= p[i] * p[i].ln();
        }
        for j in 0..n {
            let w = p[i] * c.prob(i, j);
            if w > 0.0 {
                joint -= w * w.ln();
            }
        }
    }
    joint - marginal
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn markov_decomposition_closes(c in chain_case()) {
        let d = decomposition_check(&c);
        prop_assert!(d.residual.abs() <= 1e-12, "residual {:e}", d.residual);
        prop_assert!(folding_entropy(&c) >= 0.0);
        prop_assert!((mean_entropy_generated(&c) - path_enumeration_generated(&c)).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fourth_moment_symmetry(n in 1usize..=3, m in prop::collection::vec(-1.0f64..1.0, 9)) {
        let m = matrix(3, &m).view((0, 0), (n, n)).into_owned();
        let c = &m * m.transpose() + DMatrix::identity(n, n) * 0.1;
        let c = (&c + c.transpose()) * 0.5;
        let t = gaussian_fourth_moment(&c).unwrap();
        for i in 0..n { for j in 0..n { for k in 0..n { for l in 0..n {
            let v = t.get(i, j, k, l);
            for w in [t.get(j, i, k, l), t.get(k, l, i, j), t.get(i, k, j, l), t.get(l, k, j, i), t.get(i, l, k, j)] {
                prop_assert_eq!(v, w);
            }
            let isserlis = c[(i, j)] * c[(k, l)] + c[(i, k)] * c[(j, l)] + c[(i, l)] * c[(j, k)];
            prop_assert!((v - isserlis).abs() <= 1e-14 * isserlis.abs().max(1.0));
        }}}}
    }

    #[test]
    fn pythagorean_identity_is_algebraic(
        n in 1usize..=3,
        x in prop::collection::vec(-3.0f64..3.0, 3),
        b in prop::collection::vec(-3.0f64..3.0, 3),
        g in prop::collection::vec(-3.0f64..3.0, 3),
        l in prop::collection::vec(-1.0f64..1.0, 9),
    ) {
        let l = matrix(3, &l).view((0, 0), (n, n)).into_owned();
        let d = &l * l.transpose() + DMatrix::identity(n, n) * 0.5;
        let d = (&d + d.transpose()) * 0.5;
        let c = landscape_point(&x[..n], &b[..n], &d, &g[..n]).unwrap();
        prop_assert!((c.pythagorean_residual() - 2.0 * c.ortho).abs() <= 1e-12);
    }

    #[test]
    fn solves_keep_mass_and_sign(mean in -0.8f64..0.8, var in 0.01f64..0.1, alpha in 5.0f64..40.0) {
        let s = catalog("double_well", &CatalogParams { alpha: Some(alpha), ..Default::default() }).unwrap().spec;
        // At least 7 standard deviations of room for every generated start.
        let g = make_grid(&[(-3.0, 3.0)], &[240]).unwrap();
        let f0 = init_density(&g, &InitialCondition::Gaussian { mean: vec![mean], cov: DMatrix::from_element(1, 1, var) }).unwrap();
        let mut sol = FpSolver::new(&s, &g, SolverOptions { dt: 5e-3, ..Default::default() }).unwrap();
        let out = sol.solve(&f0, 1.0, &[0.25, 0.5, 1.0]).unwrap();
        for f in &out {
            prop_assert!((f.mass() - 1.0).abs() <= 1e-9);
            prop_assert!(f.min() >= 0.0);
        }
    }
}

#[test]
fn catalog_potentials_match_their_drifts() {
    for name in catalog_names() {
        let s = catalog(name, &CatalogParams { alpha: Some(3.0), ..Default::default() }).unwrap().spec;
        let pts: Vec<Vec<f64>> = (0..100)
            .map(|k| {
                let u = -2.0 + 4.0 * (k as f64 + 0.5) / 100.0;
                (0..s.dim()).map(|a| if a == 0 { u } else { 0.7 * u.sin() }).collect()
            })
            .collect();
        for x in &pts {
            let d = s.diffusion(x);
            for i in 0..s.dim() {
                for j in 0..s.dim() {
                    assert_eq!(d[(i, j)].to_bits(), d[(j, i)].to_bits(), "{name}: D not symmetric");
                }
            }
            if s.potential().is_some() {
                assert!(s.gradient_deviation(x) < 1e-10, "{name} at {x:?}");
            }
        }
    }
}

//! Fokker-Planck solver and grid thermodynamics on the catalog systems.

mod support;

use fpthermo::fpsolve::{
    flux, init_density, make_grid, stationary_density, stationary_density_long_time,
    uniform_times, DensityField, FpSolver, Grid, InitialCondition, SolverOptions,
};
use fpthermo::thermo::{gradient_heat_identity, ThermoEvaluator, NONNEGATIVE_SLACK};
use nalgebra::{dmatrix, DMatrix};
use support::{assert_close, assert_rel, gauss_pdf, spec};

fn gaussian(grid: &Grid, mean: &[f64], cov: DMatrix<f64>) -> DensityField {
    init_density(grid, &InitialCondition::Gaussian { mean: mean.to_vec(), cov }).unwrap()
}

fn solver(name: &str, alpha: f64, grid: &Grid, dt: f64) -> FpSolver {
    FpSolver::new(&spec(name, alpha), grid, SolverOptions { dt, ..Default::default() }).unwrap()
}

#[test]
fn ou_relaxation_moments() {
    // Implicit Euler lags the mean by about t dt / 2 e^-t, so dt = 1e-4 keeps
    // the time error well under the 1e-4 target.
    let g = make_grid(&[(-2.0, 3.0)], &[1000]).unwrap();
    let f0 = gaussian(&g, &[1.0], dmatrix![0.05]);
    let out = solver("ou1d", 10.0, &g, 1e-4).solve(&f0, 1.0, &[1.0]).unwrap();
    let f = &out[0];
    let e2 = (-2.0f64).exp();
    assert_close(f.mean()[0], (-1.0f64).exp(), 1e-4, "mean");
    assert_close(f.covariance()[(0, 0)], 0.1 * (1.0 - e2) + 0.05 * e2, 1e-4, "variance");
}

#[test]
fn zero_horizon_returns_the_input() {
    let g = make_grid(&[(-2.0, 2.0)], &[100]).unwrap();
    let f0 = gaussian(&g, &[0.2], dmatrix![0.1]);
    let out = solver("double_well", 20.0, &g, 1e-3).solve(&f0, 0.0, &[0.0]).unwrap();
    assert_eq!(out[0], f0);
}

#[test]
fn double_well_reaches_its_stationary_density() {
    // Symmetric start: escape over the barrier at alpha = 20 takes far longer
    // than t = 50, so only the intra-well relaxation is tested here.
    let g = make_grid(&[(-2.5, 2.5)], &[600]).unwrap();
    let s = spec("double_well", 20.0);
    let pi = stationary_density(&s, &g).unwrap();
    let f0 = gaussian(&g, &[0.0], dmatrix![0.1]);
    let out = solver("double_well", 20.0, &g, 1e-3).solve(&f0, 50.0, &[50.0]).unwrap();
    let tv = out[0].total_variation(&pi.density).unwrap();
    assert!(tv <= 1e-3, "total variation {tv:.3e}");
}

#[test]
fn stationary_examples() {
    let g = make_grid(&[(-2.5, 2.5)], &[600]).unwrap();
    let pi = stationary_density(&spec("double_well", 20.0), &g).unwrap();
    let u = |x: f64| (x * x - 1.0).powi(2) / 4.0;
    let k: f64 = g.centers().iter().map(|x| (-20.0 * u(x[0])).exp()).sum::<f64>() * g.cell_volume();
    for (idx, x) in g.centers().iter().enumerate() {
        if x[0].abs() < 1.8 {
            assert_rel(pi.density.values()[idx], (-20.0 * u(x[0])).exp() / k, 1e-6, "Gibbs");
        }
    }
    let fl = flux(&spec("double_well", 20.0), &pi.density).unwrap();
    assert!(fl.iter().all(|f| f.value.abs() < 1e-12));

    let g = make_grid(&[(-2.0, 2.0)], &[800]).unwrap();
    let pi = stationary_density(&spec("ou1d", 10.0), &g).unwrap();
    assert_close(pi.density.covariance()[(0, 0)], 0.1, 1e-6, "ou1d stationary variance");

    let g = make_grid(&[(-2.5, 2.5), (-2.5, 2.5)], &[100, 100]).unwrap();
    let s = spec("rot_ou", 8.0);
    let pi = stationary_density(&s, &g).unwrap();
    let c = pi.density.covariance();
    let h2 = g.h(0) * g.h(0);
    assert_close(c[(0, 0)], 0.125, 2.0 * h2, "rot_ou c11");
    assert_close(c[(1, 1)], 0.125, 2.0 * h2, "rot_ou c22");
    assert_close(c[(0, 1)], 0.0, 1e-10, "rot_ou c12");
    let fl = flux(&s, &pi.density).unwrap();
    let biggest = fl.iter().map(|f| f.value.abs()).fold(0.0, f64::max);
    assert!(biggest > 1e-2, "rotational stationary flux vanished ({biggest})");
}

#[test]
fn long_time_and_null_space_agree() {
    let g = make_grid(&[(-3.5, 3.5), (-3.5, 3.5)], &[50, 50]).unwrap();
    let s = spec("rot_ou", 4.0);
    let a = stationary_density(&s, &g).unwrap();
    let b = stationary_density_long_time(&s, &g, 0.05, 200.0).unwrap();
    assert!(a.density.total_variation(&b.density).unwrap() < 1e-7);
}

#[test]
fn stationary_input_is_a_fixed_point() {
    let g = make_grid(&[(-2.5, 2.5)], &[300]).unwrap();
    let s = spec("double_well", 20.0);
    let pi = stationary_density(&s, &g).unwrap();
    let mut sol = FpSolver::new(&s, &g, SolverOptions::default()).unwrap();
    let next = sol.step(&pi.density).unwrap();
    let worst = next
        .values()
        .iter()
        .zip(pi.density.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-12 * pi.density.max(), "moved by {worst:.3e}");
}

fn heat_kernel_error(cells: usize, dt: f64) -> f64 {
    // Pure diffusion, alpha = D = 1, from N(0, 0.2): N(0, 0.2 + 2t).
    let g = make_grid(&[(-6.0, 6.0)], &[cells]).unwrap();
    let f0 = gaussian(&g, &[0.0], dmatrix![0.2]);
    let t = 0.2;
    let out = solver("pure_diffusion", 1.0, &g, dt).solve(&f0, t, &[t]).unwrap();
    let h = g.h(0);
    out[0]
        .values()
        .iter()
        .zip(g.centers())
        .map(|(v, x)| (v - gauss_pdf(x[0], 0.0, 0.2 + 2.0 * t)).abs() * h)
        .sum()
}

#[test]
fn convergence_orders() {
    // Space alone (dt negligible), then h and dt halved together.
    let space: Vec<f64> = [60, 120, 240].iter().map(|&n| heat_kernel_error(n, 1e-5)).collect();
    let joint: Vec<f64> = [(60, 0.02), (120, 0.01), (240, 0.005)]
        .iter()
        .map(|&(n, dt)| heat_kernel_error(n, dt))
        .collect();
    for e in [&space, &joint] {
        for w in e.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.0, "L1 errors {e:?}: observed order {order:.3}");
        }
    }
}

#[test]
fn mass_and_positivity_along_solves() {
    let g = make_grid(&[(-2.0, 2.0), (-2.0, 2.0)], &[60, 60]).unwrap();
    let f0 = gaussian(&g, &[0.6, -0.3], dmatrix![0.03, 0.01; 0.01, 0.05]);
    let times = uniform_times(1.0, 0.1, false);
    let out = solver("rot_ou", 10.0, &g, 1e-2).solve(&f0, 1.0, &times).unwrap();
    for f in &out {
        assert!((f.mass() - 1.0).abs() <= 1e-9);
        assert!(f.min() >= 0.0);
    }
    let g = make_grid(&[(-2.5, 2.5)], &[500]).unwrap();
    let f0 = gaussian(&g, &[-0.4], dmatrix![0.01]);
    let out = solver("double_well", 40.0, &g, 1e-3).solve(&f0, 2.0, &uniform_times(2.0, 0.1, false)).unwrap();
    for f in &out {
        assert!((f.mass() - 1.0).abs() <= 1e-9);
        assert!(f.min() >= 0.0);
    }
}

#[test]
fn rotational_rates_at_stationarity() {
    let g = make_grid(&[(-2.5, 2.5), (-2.5, 2.5)], &[100, 100]).unwrap();
    let s = spec("rot_ou", 8.0);
    let pi = stationary_density(&s, &g).unwrap();
    let ev = ThermoEvaluator::new(&s, &g, Some(&pi)).unwrap();
    let st = ev.state(&pi.density).unwrap();
    assert_rel(st.ep, 2.0, 1e-2, "ep");
    assert_rel(st.qex, -2.0, 1e-2, "qex");
    assert_rel(st.qhk, 2.0, 1e-2, "qhk");
    assert_close(st.qex, -st.ep, 1e-6, "qex = -ep");
    assert_close(st.free_energy, 0.0, 1e-12, "F");
}

#[test]
fn housekeeping_heat_vanishes_for_gradient_drifts() {
    for (name, alpha, mean, var) in [("double_well", 20.0, -0.3, 0.04), ("ou1d", 10.0, 0.8, 0.02)] {
        let g = make_grid(&[(-2.5, 2.5)], &[500]).unwrap();
        let s = spec(name, alpha);
        let pi = stationary_density(&s, &g).unwrap();
        let ev = ThermoEvaluator::new(&s, &g, Some(&pi)).unwrap();
        let f = gaussian(&g, &[mean], dmatrix![var]);
        assert!(ev.housekeeping_heat(&f).unwrap().abs() < 1e-8, "{name}");
        assert!(ev.entropy_production(&pi.density).unwrap().abs() < 1e-8, "{name}");
    }
}

#[test]
fn nonnegative_rates_on_a_rotational_transient() {
    let g = make_grid(&[(-2.5, 2.5), (-2.5, 2.5)], &[100, 100]).unwrap();
    let s = spec("rot_ou", 10.0);
    let pi = stationary_density(&s, &g).unwrap();
    let ev = ThermoEvaluator::new(&s, &g, Some(&pi)).unwrap();
    let f0 = gaussian(&g, &[0.8, 0.2], dmatrix![0.02, 0.0; 0.0, 0.06]);
    let times = uniform_times(2.0, 0.05, true);
    let out = solver("rot_ou", 10.0, &g, 1e-3).solve(&f0, 2.0, &times).unwrap();
    for f in &out {
        let st = ev.state(f).unwrap();
        assert!(st.ep >= NONNEGATIVE_SLACK, "ep {} at t = {}", st.ep, f.time());
        assert!(st.qhk >= NONNEGATIVE_SLACK, "qhk {} at t = {}", st.qhk, f.time());
        assert!(st.free_energy >= NONNEGATIVE_SLACK);
    }
}

#[test]
fn gradient_heat_identity_holds() {
    let g = make_grid(&[(-2.5, 2.5)], &[600]).unwrap();
    let s = spec("double_well", 20.0);
    let f0 = gaussian(&g, &[0.5], dmatrix![0.02]);
    let times = uniform_times(1.0, 0.01, true);
    let out = solver("double_well", 20.0, &g, 1e-3).solve(&f0, 1.0, &times).unwrap();
    let ev = ThermoEvaluator::new(&s, &g, None).unwrap();
    let scale = out.iter().map(|f| ev.heat_exchange(f).unwrap().abs()).fold(0.0, f64::max);
    let dev = gradient_heat_identity(&s, &out).unwrap();
    assert!(dev <= 1e-3f64.max(0.01 * scale), "deviation {dev:.3e}");

    let pi = stationary_density(&s, &g).unwrap();
    let still = vec![pi.density.clone(); 5]
        .into_iter()
        .enumerate()
        .map(|(k, f)| f.with_time(k as f64 * 0.01))
        .collect::<Vec<_>>();
    assert!(gradient_heat_identity(&s, &still).unwrap() < 1e-8);

    let s = spec("ou1d", 10.0);
    let f0 = gaussian(&g, &[1.0], dmatrix![0.05]);
    let out = solver("ou1d", 10.0, &g, 1e-3).solve(&f0, 1.0, &times).unwrap();
    let ev = ThermoEvaluator::new(&s, &g, None).unwrap();
    let scale = out.iter().map(|f| ev.heat_exchange(f).unwrap().abs()).fold(0.0, f64::max);
    let dev = gradient_heat_identity(&s, &out).unwrap();
    assert!(dev <= 1e-3f64.max(0.01 * scale), "ou1d deviation {dev:.3e}");
}

#[test]
fn bad_setups_are_rejected() {
    assert!(make_grid(&[(0.0, 1.0)], &[4]).is_err());
    let g = make_grid(&[(-3.0, 3.0)], &[600]).unwrap();
    assert!(init_density(&g, &InitialCondition::Gaussian { mean: vec![2.9], cov: dmatrix![0.5] }).is_err());
    let g = make_grid(&[(-0.5, 0.5)], &[100]).unwrap();
    assert!(stationary_density(&spec("ou1d", 10.0), &g).is_err());
}

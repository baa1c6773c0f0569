//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use fpthermo::model::{catalog, CatalogParams, SystemSpec};

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let (f1, f2) = (f(c - h * XGK[j]), f(c + h * XGK[j]));
        k += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod quadrature to absolute tolerance `tol`.
pub fn integrate(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (v, e) = gk15(f, a, b);
    if e <= tol || (b - a).abs() < 1e-12 {
        return v;
    }
    let m = 0.5 * (a + b);
    integrate(f, a, m, 0.5 * tol) + integrate(f, m, b, 0.5 * tol)
}

/// Nested adaptive quadrature over a rectangle.
pub fn integrate_2d(
    f: &dyn Fn(f64, f64) -> f64,
    (ax, bx): (f64, f64),
    (ay, by): (f64, f64),
    tol: f64,
) -> f64 {
    let inner_tol = tol / (bx - ax).abs().max(1.0) * 0.1;
    integrate(
        &mut |x| integrate(&mut |y| f(x, y), ay, by, inner_tol),
        ax,
        bx,
        tol,
    )
}

pub fn spec(name: &str, alpha: f64) -> SystemSpec {
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

pub fn gauss_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got:.12e}, want {want:.12e}, |diff| {:.3e} > {tol:.3e}",
        (got - want).abs()
    );
}

pub fn assert_rel(got: f64, want: f64, rel: f64, what: &str) {
    assert_close(got, want, rel * want.abs(), what);
}

/// Quadrature values of S, e_p, Q_ex, F and Q_hk for a 1D OU law
/// `N(mu, c)` with drift `-k x`, diffusion `d` and stationary variance `cs`.
pub fn scalar_quadrature(k: f64, d: f64, alpha: f64, mu: f64, c: f64) -> [f64; 5] {
    let cs = d / (k * alpha);
    let (lo, hi) = (mu - 14.0 * c.sqrt().max(cs.sqrt()), mu + 14.0 * c.sqrt().max(cs.sqrt()));
    let tol = 1e-12;
    let f = |x: f64| gauss_pdf(x, mu, c);
    let v = |x: f64| -k * x + d * (x - mu) / (alpha * c);
    let v_pi = |x: f64| -k * x + d * x / (alpha * cs);
    let s = integrate(&mut |x| { let p = f(x); if p > 0.0 { -p * p.ln() } else { 0.0 } }, lo, hi, tol);
    let ep = integrate(&mut |x| alpha * f(x) * v(x) * v(x) / d, lo, hi, tol);
    let qex = integrate(&mut |x| -alpha * f(x) * v(x) * (-k * x) / d, lo, hi, tol);
    let fe = integrate(
        &mut |x| {
            let p = f(x);
            if p > 0.0 { p * (p / gauss_pdf(x, 0.0, cs)).ln() } else { 0.0 }
        },
        lo,
        hi,
        tol,
    );
    let qhk = integrate(&mut |x| alpha * f(x) * v_pi(x) * v_pi(x) / d, lo, hi, tol);
    [s, ep, qex, fe, qhk]
}

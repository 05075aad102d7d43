#![allow(dead_code)]

use coupled_oamp::sensing::SensingOperator;
use nalgebra::{DMatrix, DVector};

/// Explicit `M × N_c` matrix of a matrix-free operator, one column per basis vector.
pub fn materialize(op: &SensingOperator) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(op.m(), op.n_c());
    for j in 0..op.n_c() {
        let mut e = vec![0.0; op.n_c()];
        e[j] = 1.0;
        a.set_column(j, &DVector::from_vec(op.forward(&e).unwrap()));
    }
    a
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn normal_pdf(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Posterior mean and variance of the Bernoulli-Gaussian prior, written
/// directly from Bayes' rule with unnormalized mixture weights.
pub fn bg_posterior(u: f64, v: f64, rho: f64) -> (f64, f64) {
    let s = 1.0 / rho;
    let slab = rho * normal_pdf(u, s + v);
    let spike = (1.0 - rho) * normal_pdf(u, v);
    let pi = slab / (slab + spike);
    let m = s / (s + v) * u;
    let c = s * v / (s + v);
    let mean = pi * m;
    (mean, pi * (c + m * m) - mean * mean)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    // start from uniform panels so narrow features cannot hide between the first nodes
    let panels = 64;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
            rec(f, lo, hi, fa, fm, fb, simpson(fa, fm, fb, lo, hi), tol / panels as f64, 50)
        })
        .sum()
}

/// `E[x | u]` and `Var[x | u]` by adaptive quadrature over the slab, with
/// the point mass at zero added exactly.
pub fn posterior_by_quadrature(u: f64, v: f64, rho: f64) -> (f64, f64) {
    let s = 1.0 / rho;
    // the slab integrand is concentrated around the conditional mean of the slab branch
    let center = s / (s + v) * u;
    let width = 16.0 * (s * v / (s + v)).sqrt();
    let (a, b) = (center - width, center + width);
    let weight = |x: f64| rho * normal_pdf(x, s) * normal_pdf(u - x, v);
    let tol = 1e-15;
    let z0 = adaptive_simpson(&|x| weight(x), a, b, tol);
    let z1 = adaptive_simpson(&|x| x * weight(x), a, b, tol);
    let z2 = adaptive_simpson(&|x| x * x * weight(x), a, b, tol);
    let z = z0 + (1.0 - rho) * normal_pdf(u, v);
    let mean = z1 / z;
    (mean, z2 / z - mean * mean)
}

/// `E[(x - E[x|u])²]` by adaptive quadrature over `u` of the closed-form posterior variance.
pub fn mmse_by_quadrature(v: f64, rho: f64) -> f64 {
    let s = 1.0 / rho;
    let marginal = |u: f64| rho * normal_pdf(u, s + v) + (1.0 - rho) * normal_pdf(u, v);
    let f = |u: f64| marginal(u) * bg_posterior(u, v, rho).1;
    // even integrand; split where the spike component fades so both scales are resolved
    let knee = 12.0 * v.sqrt();
    let far = 14.0 * (s + v).sqrt();
    2.0 * (adaptive_simpson(&f, 0.0, knee.min(far), 1e-16) + adaptive_simpson(&f, knee.min(far), far, 1e-16))
}

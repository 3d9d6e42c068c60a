//! Classical orthogonal polynomial families and Gram-matrix checks.

use ccopf::stochastics::GermComponent;

pub const DEGREE: usize = 5;

/// `p_0..=p_DEGREE` from a three-term recurrence
/// `p_{k+1} = (a_k x + b_k) p_k − c_k p_{k−1}`.
pub fn recurrence(x: f64, coef: impl Fn(usize) -> (f64, f64, f64)) -> Vec<f64> {
    let mut p = vec![1.0];
    let (a, b, _) = coef(0);
    p.push(a * x + b);
    for k in 1..DEGREE {
        let (a, b, c) = coef(k);
        p.push((a * x + b) * p[k] - c * p[k - 1]);
    }
    p
}

pub fn hermite(x: f64) -> Vec<f64> {
    recurrence(x, |k| (1.0, 0.0, k as f64))
}

/// Shifted Legendre on `[0, 1]`.
pub fn legendre(x: f64) -> Vec<f64> {
    let t = 2.0 * x - 1.0;
    recurrence(t, |k| {
        let k = k as f64;
        ((2.0 * k + 1.0) / (k + 1.0), 0.0, k / (k + 1.0))
    })
}

/// Jacobi `P_k^(α,β)(2ξ − 1)`.
pub fn jacobi(x: f64, al: f64, be: f64) -> Vec<f64> {
    let t = 2.0 * x - 1.0;
    let mut p = vec![1.0, 0.5 * (al - be) + 0.5 * (al + be + 2.0) * t];
    for n in 2..=DEGREE {
        let n = n as f64;
        let s = 2.0 * n + al + be;
        let a1 = 2.0 * n * (n + al + be) * (s - 2.0);
        let a2 = (s - 1.0) * (al * al - be * be);
        let a3 = (s - 2.0) * (s - 1.0) * s;
        let a4 = 2.0 * (n + al - 1.0) * (n + be - 1.0) * s;
        let k = p.len();
        p.push(((a2 + a3 * t) * p[k - 1] - a4 * p[k - 2]) / a1);
    }
    p
}

/// Generalized Laguerre `L_k^(α)`.
pub fn laguerre(x: f64, al: f64) -> Vec<f64> {
    recurrence(x, |k| {
        let k = k as f64;
        (-1.0 / (k + 1.0), (2.0 * k + 1.0 + al) / (k + 1.0), (k + al) / (k + 1.0))
    })
}

/// Largest off-diagonal entry of the Gram matrix, relative to the
/// diagonal.
pub fn off_diagonal(integrate: impl Fn(&dyn Fn(f64) -> f64) -> f64, polys: impl Fn(f64) -> Vec<f64>) -> f64 {
    let m = polys(0.5).len();
    let mut worst = 0.0f64;
    let norms: Vec<f64> = (0..m).map(|i| integrate(&|x| polys(x)[i].powi(2))).collect();
    for i in 0..m {
        for j in 0..i {
            let g = integrate(&|x| {
                let p = polys(x);
                p[i] * p[j]
            });
            worst = worst.max(g.abs() / (norms[i] * norms[j]).sqrt());
        }
    }
    worst
}

pub fn by_quadrature(c: &GermComponent) -> impl Fn(&dyn Fn(f64) -> f64) -> f64 + '_ {
    let rule = c.quadrature(24);
    move |f| rule.integrate(f)
}

/// Composite Simpson against an explicit density.
pub fn by_simpson(lo: f64, hi: f64, pdf: impl Fn(f64) -> f64) -> impl Fn(&dyn Fn(f64) -> f64) -> f64 {
    move |f| {
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let x = lo + k as f64 * h;
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(x) * pdf(x);
        }
        acc * h / 3.0
    }
}

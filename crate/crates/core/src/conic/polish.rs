//! Active-set polishing of an interior-point solution.
//!
//! Near a vertex the barrier keeps every inactive slack at `μ/z` away from
//! zero, so a converged iterate can still sit visibly off a bound when the
//! bound's multiplier is small. Polishing guesses the active set from the
//! final iterate, solves the equality-constrained QP on it and keeps the
//! result only if it is a KKT point of the full problem.
//!
//! Each cone block is classified by comparing eigenvalues of `s` and `z`:
//!
//! * orthant row: active when `s < z`, giving `G_r x = h_r`;
//! * Lorentz block, `z` dominated by `s`: inactive;
//! * Lorentz block, `s` at the apex: every row is an equality;
//! * otherwise both sit on the boundary and the block is replaced by the
//!   supporting hyperplane `ẑᵀ(h − Gx) = 0` with `z = μ ẑ`, `μ ≥ 0`.

use faer::linalg::solvers::Solve;
use faer::Mat;

use super::cones::{self, layout, norm, Block};
use super::ConicProblem;

/// Dense KKT size above which polishing is skipped.
const MAX_DIM: usize = 2500;
const REFINE_STEPS: usize = 20;

#[derive(Debug, Clone, Copy)]
enum Row {
    Orthant(usize),
    Hyperplane(usize),
    Apex(usize),
}

pub(crate) struct Polished {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
}

fn inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn eigs(s: &[f64]) -> (f64, f64) {
    let r = norm(&s[1..]);
    (s[0] - r, s[0] + r)
}

fn quad_cost(p: &ConicProblem, x: &[f64]) -> f64 {
    let px = p.p.mul(x);
    0.5 * cones::dot(&px, x) + cones::dot(&p.c, x)
}

pub(crate) fn polish(p: &ConicProblem, x0: &[f64], s0: &[f64], z0: &[f64]) -> Option<Polished> {
    let n = p.n();
    let m_a = p.b.len();
    if n == 0 || p.lower.iter().chain(&p.upper).any(|v| v.is_finite()) {
        return None;
    }
    let blocks = layout(&p.cones);

    // equality rows: (coefficients over x, rhs, origin)
    let mut rows: Vec<(Vec<(usize, f64)>, f64, Row)> = Vec::new();
    let mut normals: Vec<(Block, Vec<f64>)> = Vec::new();
    let g_row = |r: usize| -> Vec<(usize, f64)> {
        let (idx, val) = p.g.row(r);
        idx.iter().copied().zip(val.iter().copied()).collect()
    };
    for b in &blocks {
        if !b.soc {
            for r in b.range() {
                if s0[r] < z0[r] {
                    rows.push((g_row(r), p.h[r], Row::Orthant(r)));
                }
            }
            continue;
        }
        let (s_lo, s_hi) = eigs(&s0[b.range()]);
        let (z_lo, z_hi) = eigs(&z0[b.range()]);
        if z_hi < s_lo {
            continue;
        }
        if s_hi < z_lo {
            for r in b.range() {
                rows.push((g_row(r), p.h[r], Row::Apex(r)));
            }
            continue;
        }
        // boundary normal: z projected onto ∂K and normalized
        let zb = &z0[b.range()];
        let r1 = norm(&zb[1..]);
        if r1 == 0.0 {
            return None;
        }
        let mut nrm = vec![r1];
        nrm.extend_from_slice(&zb[1..]);
        let scale = 1.0 / norm(&nrm);
        nrm.iter_mut().for_each(|v| *v *= scale);
        let mut coef = vec![0.0; n];
        let mut rhs = 0.0;
        for (k, r) in b.range().enumerate() {
            let (idx, val) = p.g.row(r);
            for (&j, &v) in idx.iter().zip(val) {
                coef[j] += nrm[k] * v;
            }
            rhs += nrm[k] * p.h[r];
        }
        let sparse: Vec<(usize, f64)> = coef.into_iter().enumerate().filter(|(_, v)| *v != 0.0).collect();
        rows.push((sparse, rhs, Row::Hyperplane(normals.len())));
        normals.push((*b, nrm));
    }

    let m_e = m_a + rows.len();
    let dim = n + m_e;
    if dim > MAX_DIM {
        log::debug!("polish: skipped, KKT dimension {dim}");
        return None;
    }

    // K = [P Eᵀ; E 0], E = [A; active rows]
    let mut k = Mat::<f64>::zeros(dim, dim);
    for r in 0..n {
        let (idx, val) = p.p.row(r);
        for (&j, &v) in idx.iter().zip(val) {
            k[(r, j)] += v;
        }
    }
    let mut rhs = vec![0.0; dim];
    rhs[..n].iter_mut().zip(&p.c).for_each(|(r, c)| *r = -c);
    for r in 0..m_a {
        let (idx, val) = p.a.row(r);
        for (&j, &v) in idx.iter().zip(val) {
            k[(n + r, j)] = v;
            k[(j, n + r)] = v;
        }
        rhs[n + r] = p.b[r];
    }
    for (t, (coef, h, _)) in rows.iter().enumerate() {
        let r = n + m_a + t;
        for &(j, v) in coef {
            k[(r, j)] = v;
            k[(j, r)] = v;
        }
        rhs[r] = *h;
    }
    let scale = (0..dim).fold(1.0f64, |m, i| m.max(k[(i, i)].abs()));
    let delta = 1e-11 * scale;
    let mut reg = k.clone();
    for i in 0..dim {
        reg[(i, i)] += if i < n { delta } else { -delta };
    }
    let lu = reg.partial_piv_lu();
    let mut sol = vec![0.0; dim];
    let mut best = f64::INFINITY;
    for _ in 0..REFINE_STEPS {
        let mut res = rhs.clone();
        for i in 0..dim {
            let mut acc = 0.0;
            for j in 0..dim {
                acc += k[(i, j)] * sol[j];
            }
            res[i] -= acc;
        }
        let rn = inf(&res);
        if !(rn < 0.5 * best) {
            break;
        }
        best = rn;
        let step = lu.solve(Mat::<f64>::from_fn(dim, 1, |i, _| res[i]));
        for i in 0..dim {
            sol[i] += step[(i, 0)];
        }
    }
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }

    // `Px + Eᵀλ = −c` is stationarity with `λ = (y, z_active)`.
    let x = sol[..n].to_vec();
    let y = sol[n..n + m_a].to_vec();
    let mut z = vec![0.0; p.h.len()];
    let dual_tol = 1e-9 * (1.0 + inf(&p.c));
    for (t, (_, _, origin)) in rows.iter().enumerate() {
        let m = sol[n + m_a + t];
        match *origin {
            Row::Orthant(r) => {
                if m < -dual_tol {
                    return None;
                }
                z[r] = m.max(0.0);
            }
            Row::Apex(r) => z[r] = m,
            Row::Hyperplane(q) => {
                if m < -dual_tol {
                    return None;
                }
                let (b, nrm) = &normals[q];
                for (kk, r) in b.range().enumerate() {
                    z[r] = m.max(0.0) * nrm[kk];
                }
            }
        }
    }
    for b in blocks.iter().filter(|b| b.soc) {
        let (lo, _) = eigs(&z[b.range()]);
        if lo < -dual_tol {
            return None;
        }
    }

    let mut s = p.h.clone();
    p.g.mul_acc(&x, &mut s, -1.0);
    let primal_tol = 1e-10 * (1.0 + inf(&p.h).max(inf(&p.b)));
    for (_, _, origin) in &rows {
        if let Row::Orthant(r) | Row::Apex(r) = *origin {
            if s[r].abs() > primal_tol {
                return None;
            }
            s[r] = 0.0;
        }
    }
    if cones::min_eig(&blocks, &s) < -primal_tol {
        return None;
    }
    let mut ax = p.a.mul(&x);
    ax.iter_mut().zip(&p.b).for_each(|(v, b)| *v -= b);
    if inf(&ax) > primal_tol {
        return None;
    }
    let mut stat = p.p.mul(&x);
    stat.iter_mut().zip(&p.c).for_each(|(v, c)| *v += c);
    p.a.tmul_acc(&y, &mut stat, 1.0);
    p.g.tmul_acc(&z, &mut stat, 1.0);
    if inf(&stat) > dual_tol {
        return None;
    }
    let before = quad_cost(p, x0);
    if quad_cost(p, &x) > before + 1e-9 * (1.0 + before.abs()) {
        return None;
    }
    Some(Polished { x, y, z, s })
}

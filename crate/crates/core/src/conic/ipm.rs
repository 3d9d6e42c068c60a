//! Homogeneous self-dual embedding with Nesterov–Todd scaling and a
//! Mehrotra predictor-corrector.

use super::cones::{self, dot, layout, Block, NtScaling};
use super::kkt::Kkt;
use super::{ConicProblem, IterationLog, Settings, SolveStatus, SparseMatrix};

pub(crate) struct RawResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    pub iterations: usize,
    pub trace: Vec<IterationLog>,
}

/// Ruiz equilibration: `Â = E A D`, `Ĝ = F G D`, `P̂ = σ D P D`, `ĉ = σ D c`.
struct Scaling {
    d: Vec<f64>,
    e: Vec<f64>,
    f: Vec<f64>,
    sigma: f64,
}

const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;

fn equilibrate(p: &ConicProblem, blocks: &[Block], passes: usize) -> Scaling {
    let (n, m_a, m_g) = (p.n(), p.b.len(), p.h.len());
    let mut sc = Scaling {
        d: vec![1.0; n],
        e: vec![1.0; m_a],
        f: vec![1.0; m_g],
        sigma: 1.0,
    };
    let mut a = p.a.clone();
    let mut g = p.g.clone();
    let mut q = p.p.clone();
    for _ in 0..passes {
        let ca = a.col_max_abs();
        let cg = g.col_max_abs();
        let cq = q.col_max_abs();
        let dc: Vec<f64> = (0..n)
            .map(|j| {
                let m = ca[j].max(cg[j]).max(cq[j]);
                if m > 0.0 {
                    1.0 / m.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let ea: Vec<f64> = (0..m_a)
            .map(|r| {
                let m = a.row_max_abs(r);
                if m > 0.0 {
                    1.0 / m.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let mut fg = vec![1.0; m_g];
        for b in blocks {
            if b.soc {
                let m = b.range().fold(0.0f64, |m, r| m.max(g.row_max_abs(r)));
                let v = if m > 0.0 { 1.0 / m.sqrt() } else { 1.0 };
                b.range().for_each(|r| fg[r] = v);
            } else {
                for r in b.range() {
                    let m = g.row_max_abs(r);
                    fg[r] = if m > 0.0 { 1.0 / m.sqrt() } else { 1.0 };
                }
            }
        }
        // clamp cumulative factors
        let clamp = |acc: &mut [f64], step: &mut [f64]| {
            for (a, s) in acc.iter_mut().zip(step.iter_mut()) {
                let new = (*a * *s).clamp(SCALE_MIN, SCALE_MAX);
                *s = new / *a;
                *a = new;
            }
        };
        let mut dc = dc;
        let mut ea = ea;
        clamp(&mut sc.d, &mut dc);
        clamp(&mut sc.e, &mut ea);
        clamp(&mut sc.f, &mut fg);
        a.scale(&ea, &dc);
        g.scale(&fg, &dc);
        q.scale(&dc, &dc);
    }
    let cmax = p
        .c
        .iter()
        .zip(&sc.d)
        .fold(0.0f64, |m, (c, d)| m.max((c * d).abs()));
    let qmax = q.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let obj = cmax.max(qmax);
    sc.sigma = if obj > 0.0 { (1.0 / obj).clamp(SCALE_MIN, SCALE_MAX) } else { 1.0 };
    sc
}

struct Scaled {
    q: SparseMatrix,
    c: Vec<f64>,
    a: SparseMatrix,
    b: Vec<f64>,
    g: SparseMatrix,
    h: Vec<f64>,
}

fn apply_scaling(p: &ConicProblem, sc: &Scaling) -> Scaled {
    let mut a = p.a.clone();
    a.scale(&sc.e, &sc.d);
    let mut g = p.g.clone();
    g.scale(&sc.f, &sc.d);
    let mut q = p.p.clone();
    let sd: Vec<f64> = sc.d.iter().map(|d| sc.sigma * d).collect();
    q.scale(&sd, &sc.d);
    Scaled {
        q,
        c: p.c.iter().zip(&sc.d).map(|(c, d)| sc.sigma * c * d).collect(),
        b: p.b.iter().zip(&sc.e).map(|(b, e)| b * e).collect(),
        h: p.h.iter().zip(&sc.f).map(|(h, f)| h * f).collect(),
        a,
        g,
    }
}

fn inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

/// Solves a problem with free variables (bounds are ignored; presolve
/// turns them into cone rows).
pub(crate) fn solve_standard(p: &ConicProblem, settings: &Settings) -> RawResult {
    let blocks = layout(&p.cones);
    let (n, m_a, m_g) = (p.n(), p.b.len(), p.h.len());
    if n == 0 {
        return solve_empty(p, &blocks);
    }
    let sc = if settings.equilibrate {
        equilibrate(p, &blocks, 10)
    } else {
        Scaling {
            d: vec![1.0; n],
            e: vec![1.0; m_a],
            f: vec![1.0; m_g],
            sigma: 1.0,
        }
    };
    let q = apply_scaling(p, &sc);
    let nu = cones::degree(&blocks) as f64;
    let mut kkt = Kkt::new(&q.q, &q.a, &q.g, &blocks);

    let unit = {
        let mut e = vec![0.0; m_g];
        cones::add_identity(&blocks, &mut e, 1.0);
        e
    };
    let nt_id = NtScaling::new(&blocks, &unit, &unit);
    let mut result = RawResult {
        status: SolveStatus::NumericalError,
        x: vec![0.0; n],
        y: vec![0.0; m_a],
        z: vec![0.0; m_g],
        s: vec![0.0; m_g],
        iterations: 0,
        trace: Vec::new(),
    };
    if !kkt.factor(&nt_id) {
        log::warn!("conic: initial KKT factorization failed");
        return result;
    }
    let zeros_n = vec![0.0; n];
    let zeros_a = vec![0.0; m_a];
    let zeros_g = vec![0.0; m_g];
    let primal0 = kkt.solve(&nt_id, &zeros_n, &q.b, &q.h);
    let mut x = primal0.x;
    let mut s: Vec<f64> = primal0.z.iter().map(|v| -v).collect();
    let neg_c: Vec<f64> = q.c.iter().map(|v| -v).collect();
    let dual0 = kkt.solve(&nt_id, &neg_c, &zeros_a, &zeros_g);
    let mut y = dual0.y;
    let mut z = dual0.z;
    for v in [&mut s, &mut z] {
        let shift = -cones::min_eig(&blocks, v);
        if m_g > 0 && shift >= 0.0 {
            cones::add_identity(&blocks, v, 1.0 + shift);
        }
    }
    let (mut tau, mut kappa) = (1.0f64, 1.0f64);

    let b_norm = inf(&p.b);
    let h_norm = inf(&p.h);
    let c_norm = inf(&p.c);

    let mut lambda = vec![0.0; m_g];
    let mut tmp = vec![0.0; m_g];
    let mut tmp2 = vec![0.0; m_g];
    let mut ws = vec![0.0; m_g];
    let mut wz = vec![0.0; m_g];

    for iter in 0..=settings.max_iter {
        // residuals of the embedding
        let qx = q.q.mul(&x);
        let xqx_tau = dot(&x, &qx) / tau;
        let mut r1: Vec<f64> = q.c.iter().zip(&qx).map(|(c, v)| c * tau + v).collect();
        q.a.tmul_acc(&y, &mut r1, 1.0);
        q.g.tmul_acc(&z, &mut r1, 1.0);
        let mut r2: Vec<f64> = q.b.iter().map(|b| b * tau).collect();
        q.a.mul_acc(&x, &mut r2, -1.0);
        let mut r3: Vec<f64> = q.h.iter().zip(&s).map(|(h, s)| h * tau - s).collect();
        q.g.mul_acc(&x, &mut r3, -1.0);
        let cx = dot(&q.c, &x);
        let by = dot(&q.b, &y);
        let hz = dot(&q.h, &z);
        let r4 = -cx - by - hz - kappa - xqx_tau;

        // convergence in original units
        let xo: Vec<f64> = x.iter().zip(&sc.d).map(|(x, d)| x * d / tau).collect();
        let yo: Vec<f64> = y.iter().zip(&sc.e).map(|(y, e)| y * e / (sc.sigma * tau)).collect();
        let zo: Vec<f64> = z.iter().zip(&sc.f).map(|(z, f)| z * f / (sc.sigma * tau)).collect();
        let so: Vec<f64> = s.iter().zip(&sc.f).map(|(s, f)| s / (f * tau)).collect();
        let mut pe = p.a.mul(&xo);
        axpy(&mut pe, -1.0, &p.b);
        let mut pc = p.g.mul(&xo);
        for k in 0..m_g {
            pc[k] += so[k] - p.h[k];
        }
        let pres = (inf(&pe) / (1.0 + b_norm)).max(inf(&pc) / (1.0 + h_norm));
        let mut de = p.c.clone();
        p.a.tmul_acc(&yo, &mut de, 1.0);
        p.g.tmul_acc(&zo, &mut de, 1.0);
        let pxo = p.p.mul(&xo);
        axpy(&mut de, 1.0, &pxo);
        let dres = inf(&de) / (1.0 + c_norm);
        let quad = 0.5 * dot(&xo, &pxo);
        let pcost = dot(&p.c, &xo) + quad;
        let dcost = -dot(&p.b, &yo) - dot(&p.h, &zo) - quad;
        let gap_abs = dot(&so, &zo);
        let gap = gap_abs.abs().max((pcost - dcost).abs()) / (1.0 + pcost.abs().min(dcost.abs()));

        if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
            log::warn!("conic: non-finite iterate at iteration {iter}");
            result.status = SolveStatus::NumericalError;
            result.iterations = iter;
            return result;
        }
        result.x = xo;
        result.y = yo;
        result.z = zo;
        result.s = so;
        result.iterations = iter;

        if pres <= settings.tol && dres <= settings.tol && gap <= settings.tol {
            result.status = SolveStatus::Optimal;
            push_log(&mut result.trace, iter, pcost, dcost, pres, dres, gap, 0.0, 0.0, settings);
            return result;
        }

        // infeasibility certificates (unnormalized by τ)
        if kappa > tau {
            let dual_obj = -(by + hz) / sc.sigma;
            if dual_obj > 0.0 {
                let yc: Vec<f64> = y.iter().zip(&sc.e).map(|(y, e)| y * e / sc.sigma).collect();
                let zc: Vec<f64> = z.iter().zip(&sc.f).map(|(z, f)| z * f / sc.sigma).collect();
                let mut ray = vec![0.0; n];
                p.a.tmul_acc(&yc, &mut ray, 1.0);
                p.g.tmul_acc(&zc, &mut ray, 1.0);
                let bh = -(dot(&p.b, &yc) + dot(&p.h, &zc));
                if bh > 0.0 && inf(&ray) <= settings.tol * bh * (1.0 + c_norm) {
                    result.status = SolveStatus::Infeasible;
                    result.x = vec![0.0; n];
                    result.s = vec![0.0; m_g];
                    result.y = yc.iter().map(|v| v / bh).collect();
                    result.z = zc.iter().map(|v| v / bh).collect();
                    return result;
                }
            }
            if cx < 0.0 {
                let xc: Vec<f64> = x.iter().zip(&sc.d).map(|(x, d)| x * d).collect();
                let scx: Vec<f64> = s.iter().zip(&sc.f).map(|(s, f)| s / f).collect();
                let cxo = dot(&p.c, &xc);
                let ax = p.a.mul(&xc);
                let px = p.p.mul(&xc);
                let mut gx = p.g.mul(&xc);
                axpy(&mut gx, 1.0, &scx);
                let lim = settings.tol * (-cxo);
                if cxo < 0.0
                    && inf(&ax).max(inf(&gx)) <= lim * (1.0 + b_norm.max(h_norm))
                    && inf(&px) <= lim * (1.0 + c_norm)
                {
                    result.status = SolveStatus::Unbounded;
                    result.x = xc.iter().map(|v| v / -cxo).collect();
                    result.s = scx.iter().map(|v| v / -cxo).collect();
                    result.y = vec![0.0; m_a];
                    result.z = vec![0.0; m_g];
                    return result;
                }
            }
        }
        if iter == settings.max_iter {
            result.status = SolveStatus::MaxIter;
            return result;
        }

        let nt = NtScaling::new(&blocks, &s, &z);
        nt.apply(&blocks, &z, &mut lambda, false);
        if !kkt.factor(&nt) {
            log::warn!("conic: KKT factorization failed at iteration {iter}");
            result.status = SolveStatus::NumericalError;
            return result;
        }
        let u1 = kkt.solve(&nt, &neg_c, &q.b, &q.h);
        // linearizing xᵀPx/τ adds 2Pξ to c in the τ row, ξ = x/τ
        let c_t: Vec<f64> = q.c.iter().zip(&qx).map(|(c, v)| c + 2.0 * v / tau).collect();
        let xi_q_xi = xqx_tau / tau;
        let c_u1 = dot(&c_t, &u1.x) + dot(&q.b, &u1.y) + dot(&q.h, &u1.z);

        // direction for given right-hand sides; returns (Δx, Δy, Δz, Δs, Δτ, Δκ)
        let direction = |frac: f64, ds: &[f64], dkappa: f64| {
            let mut wl = vec![0.0; m_g];
            let mut t = vec![0.0; m_g];
            cones::jordan_div(&blocks, &lambda, ds, &mut t);
            nt.apply(&blocks, &t, &mut wl, false);
            let rhs1: Vec<f64> = r1.iter().map(|v| -frac * v).collect();
            let rhs2: Vec<f64> = r2.iter().map(|v| frac * v).collect();
            let rhs3: Vec<f64> = r3.iter().zip(&wl).map(|(v, w)| frac * v + w).collect();
            let u2 = kkt.solve(&nt, &rhs1, &rhs2, &rhs3);
            let d4 = frac * r4;
            let num = -d4 - dkappa / tau + dot(&c_t, &u2.x) + dot(&q.b, &u2.y) + dot(&q.h, &u2.z);
            let den = kappa / tau + xi_q_xi - c_u1;
            let dtau = num / den;
            let mut dx = u2.x;
            axpy(&mut dx, dtau, &u1.x);
            let mut dy = u2.y;
            axpy(&mut dy, dtau, &u1.y);
            let mut dz = u2.z;
            axpy(&mut dz, dtau, &u1.z);
            let mut w2dz = vec![0.0; m_g];
            nt.apply_sq(&blocks, &dz, &mut w2dz, false);
            let ds_vec: Vec<f64> = wl.iter().zip(&w2dz).map(|(a, b)| -a - b).collect();
            let dkap = -(dkappa + kappa * dtau) / tau;
            (dx, dy, dz, ds_vec, dtau, dkap)
        };
        let step_len = |dz: &[f64], ds: &[f64], dtau: f64, dkap: f64, ws: &mut [f64], wz: &mut [f64]| {
            nt.apply(&blocks, ds, ws, true);
            nt.apply(&blocks, dz, wz, false);
            let mut a = cones::max_step(&blocks, &lambda, ws).min(cones::max_step(&blocks, &lambda, wz));
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkap < 0.0 {
                a = a.min(-kappa / dkap);
            }
            a
        };

        // predictor
        cones::jordan_prod(&blocks, &lambda, &lambda, &mut tmp);
        let (_, _, dz_a, ds_a, dtau_a, dkap_a) = direction(1.0, &tmp, kappa * tau);
        let alpha_aff = step_len(&dz_a, &ds_a, dtau_a, dkap_a, &mut ws, &mut wz).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);
        let mu = (dot(&s, &z) + tau * kappa) / (nu + 1.0);

        // corrector
        cones::jordan_prod(&blocks, &ws, &wz, &mut tmp2);
        let mut dsc = tmp.clone();
        axpy(&mut dsc, 1.0, &tmp2);
        cones::add_identity(&blocks, &mut dsc, -sigma * mu);
        let dkc = kappa * tau + dkap_a * dtau_a - sigma * mu;
        let (dx, dy, dz, ds, dtau, dkap) = direction(1.0 - sigma, &dsc, dkc);
        let alpha = (settings.step_fraction * step_len(&dz, &ds, dtau, dkap, &mut ws, &mut wz)).min(1.0);

        push_log(&mut result.trace, iter, pcost, dcost, pres, dres, gap, sigma, alpha, settings);

        axpy(&mut x, alpha, &dx);
        axpy(&mut y, alpha, &dy);
        axpy(&mut z, alpha, &dz);
        axpy(&mut s, alpha, &ds);
        tau += alpha * dtau;
        kappa += alpha * dkap;
        if !(tau > 0.0 && kappa > 0.0) || cones::min_eig(&blocks, &s) <= 0.0 && m_g > 0 {
            log::warn!("conic: iterate left the cone at iteration {iter}");
            result.status = SolveStatus::NumericalError;
            return result;
        }
    }
    result
}

#[allow(clippy::too_many_arguments)]
fn push_log(
    trace: &mut Vec<IterationLog>,
    iter: usize,
    pcost: f64,
    dcost: f64,
    pres: f64,
    dres: f64,
    gap: f64,
    sigma: f64,
    step: f64,
    settings: &Settings,
) {
    if settings.verbose {
        log::info!(
            "{iter:3} pcost {pcost:+.6e} dcost {dcost:+.6e} pres {pres:.1e} dres {dres:.1e} gap {gap:.1e} step {step:.3}"
        );
    }
    trace.push(IterationLog {
        iter,
        pcost,
        dcost,
        pres,
        dres,
        gap,
        sigma,
        step,
    });
}

/// All variables eliminated: only feasibility of `h ∈ K` remains.
fn solve_empty(p: &ConicProblem, blocks: &[Block]) -> RawResult {
    let tol = 1e-9 * (1.0 + inf(&p.h));
    let ok = p.b.iter().all(|b| b.abs() <= tol) && (p.h.is_empty() || cones::min_eig(blocks, &p.h) >= -tol);
    RawResult {
        status: if ok { SolveStatus::Optimal } else { SolveStatus::Infeasible },
        x: Vec::new(),
        y: vec![0.0; p.b.len()],
        z: vec![0.0; p.h.len()],
        s: p.h.clone(),
        iterations: 0,
        trace: Vec::new(),
    }
}

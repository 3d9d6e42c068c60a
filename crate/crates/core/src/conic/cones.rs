//! Cone arithmetic for the nonnegative orthant and the second-order cone,
//! using the Jordan algebra with identity `e = (1, 0, …, 0)` on each SOC
//! block.

use super::Cone;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Block {
    pub soc: bool,
    pub start: usize,
    pub dim: usize,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.dim
    }
}

pub(crate) fn layout(cones: &[Cone]) -> Vec<Block> {
    let mut start = 0;
    cones
        .iter()
        .map(|c| {
            let (soc, dim) = match *c {
                Cone::NonNeg(d) => (false, d),
                Cone::Soc(d) => (true, d),
            };
            let b = Block { soc, start, dim };
            start += dim;
            b
        })
        .collect()
}

/// Barrier degree: one per orthant coordinate, one per SOC.
pub(crate) fn degree(blocks: &[Block]) -> usize {
    blocks.iter().map(|b| if b.soc { 1 } else { b.dim }).sum()
}

/// Smallest eigenvalue of `v` in the Jordan algebra over all blocks.
pub(crate) fn min_eig(blocks: &[Block], v: &[f64]) -> f64 {
    let mut m = f64::INFINITY;
    for b in blocks {
        let s = &v[b.range()];
        if b.soc {
            m = m.min(s[0] - norm(&s[1..]));
        } else {
            m = s.iter().fold(m, |acc, &x| acc.min(x));
        }
    }
    m
}

/// `v += a·e`.
pub(crate) fn add_identity(blocks: &[Block], v: &mut [f64], a: f64) {
    for b in blocks {
        if b.soc {
            v[b.start] += a;
        } else {
            v[b.range()].iter_mut().for_each(|x| *x += a);
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jordan product `u ∘ v`.
pub(crate) fn jordan_prod(blocks: &[Block], u: &[f64], v: &[f64], out: &mut [f64]) {
    for b in blocks {
        let r = b.range();
        let (u, v, o) = (&u[r.clone()], &v[r.clone()], &mut out[r]);
        if b.soc {
            o[0] = dot(u, v);
            for k in 1..b.dim {
                o[k] = u[0] * v[k] + v[0] * u[k];
            }
        } else {
            for k in 0..b.dim {
                o[k] = u[k] * v[k];
            }
        }
    }
}

/// Solves `λ ∘ x = v` for `x`.
pub(crate) fn jordan_div(blocks: &[Block], lambda: &[f64], v: &[f64], out: &mut [f64]) {
    for b in blocks {
        let r = b.range();
        let (l, v, o) = (&lambda[r.clone()], &v[r.clone()], &mut out[r]);
        if b.soc {
            let det = l[0] * l[0] - dot(&l[1..], &l[1..]);
            let x0 = (l[0] * v[0] - dot(&l[1..], &v[1..])) / det;
            o[0] = x0;
            for k in 1..b.dim {
                o[k] = (v[k] - x0 * l[k]) / l[0];
            }
        } else {
            for k in 0..b.dim {
                o[k] = v[k] / l[k];
            }
        }
    }
}

/// Largest `α ≥ 0` with `v + α d` in the closed cone, for `v` interior.
/// Returns `f64::INFINITY` when the ray never leaves the cone.
pub(crate) fn max_step(blocks: &[Block], v: &[f64], d: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    for b in blocks {
        let r = b.range();
        let (v, d) = (&v[r.clone()], &d[r]);
        if b.soc {
            alpha = alpha.min(soc_step(v, d));
        } else {
            for k in 0..b.dim {
                if d[k] < 0.0 {
                    alpha = alpha.min(-v[k] / d[k]);
                }
            }
        }
    }
    alpha
}

fn soc_step(v: &[f64], d: &[f64]) -> f64 {
    // q(α) = a α² + 2 b α + c, with c > 0 at an interior point
    let a = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let b = v[0] * d[0] - dot(&v[1..], &d[1..]);
    let c = (v[0] * v[0] - dot(&v[1..], &v[1..])).max(0.0);
    let mut best = f64::INFINITY;
    // the head must stay nonnegative as well
    if d[0] < 0.0 {
        best = -v[0] / d[0];
    }
    if a == 0.0 {
        if b < 0.0 {
            best = best.min(-c / (2.0 * b));
        }
        return best;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return best;
    }
    let sq = disc.sqrt();
    let q = -(b + b.signum() * sq);
    for root in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
        if root > 0.0 {
            best = best.min(root);
        }
    }
    best
}

/// Nesterov–Todd scaling `W` with `W z = W⁻¹ s = λ`.
#[derive(Debug, Clone)]
pub(crate) struct NtScaling {
    /// Per coordinate `√(s/z)` on orthant blocks; unused elsewhere.
    pub w: Vec<f64>,
    /// Per SOC block: `η` and the normalized point `w̄` (stored in `w`
    /// over the block's rows).
    pub eta: Vec<f64>,
}

impl NtScaling {
    pub fn new(blocks: &[Block], s: &[f64], z: &[f64]) -> Self {
        let mut w = vec![0.0; s.len()];
        let mut eta = vec![1.0; blocks.len()];
        for (k, b) in blocks.iter().enumerate() {
            let r = b.range();
            if b.soc {
                let (s, z) = (&s[r.clone()], &z[r.clone()]);
                let sj = (s[0] * s[0] - dot(&s[1..], &s[1..])).max(f64::MIN_POSITIVE);
                let zj = (z[0] * z[0] - dot(&z[1..], &z[1..])).max(f64::MIN_POSITIVE);
                let (sn, zn) = (sj.sqrt(), zj.sqrt());
                let sz = dot(s, z) / (sn * zn);
                let gamma = ((1.0 + sz) / 2.0).sqrt();
                let wb = &mut w[r];
                wb[0] = (s[0] / sn + z[0] / zn) / (2.0 * gamma);
                for i in 1..b.dim {
                    wb[i] = (s[i] / sn - z[i] / zn) / (2.0 * gamma);
                }
                // w̄ has unit J-norm; renormalize against round-off
                let wj = (wb[0] * wb[0] - dot(&wb[1..], &wb[1..])).max(f64::MIN_POSITIVE);
                let scale = 1.0 / wj.sqrt();
                wb.iter_mut().for_each(|x| *x *= scale);
                eta[k] = (sj / zj).powf(0.25);
            } else {
                for i in r {
                    w[i] = (s[i] / z[i]).sqrt();
                }
            }
        }
        NtScaling { w, eta }
    }

    /// `out = W v` (or `W⁻¹ v` when `inverse`).
    pub fn apply(&self, blocks: &[Block], v: &[f64], out: &mut [f64], inverse: bool) {
        for (k, b) in blocks.iter().enumerate() {
            let r = b.range();
            let (w, v, o) = (&self.w[r.clone()], &v[r.clone()], &mut out[r]);
            if b.soc {
                // W̄ v = (w̄ᵀv, v₁ + (v₀ + w̄₁ᵀv₁/(1 + w̄₀)) w̄₁); W⁻¹ = J W̄ J / η
                let sign = if inverse { -1.0 } else { 1.0 };
                let eta = if inverse { 1.0 / self.eta[k] } else { self.eta[k] };
                let v0 = v[0];
                let w1v1 = sign * dot(&w[1..], &v[1..]);
                o[0] = eta * (w[0] * v0 + w1v1);
                let coef = v0 + w1v1 / (1.0 + w[0]);
                for i in 1..b.dim {
                    o[i] = eta * (v[i] + sign * coef * w[i]);
                }
            } else if inverse {
                for i in 0..b.dim {
                    o[i] = v[i] / w[i];
                }
            } else {
                for i in 0..b.dim {
                    o[i] = v[i] * w[i];
                }
            }
        }
    }

    /// `out = W² v` (or `W⁻² v`).
    pub fn apply_sq(&self, blocks: &[Block], v: &[f64], out: &mut [f64], inverse: bool) {
        for (k, b) in blocks.iter().enumerate() {
            let r = b.range();
            let (w, v, o) = (&self.w[r.clone()], &v[r.clone()], &mut out[r]);
            if b.soc {
                // W² = η²(2w̄w̄ᵀ − J), W⁻² = η⁻²(2Jw̄w̄ᵀJ − J)
                let sign = if inverse { -1.0 } else { 1.0 };
                let e2 = if inverse {
                    1.0 / (self.eta[k] * self.eta[k])
                } else {
                    self.eta[k] * self.eta[k]
                };
                let t = 2.0 * (w[0] * v[0] + sign * dot(&w[1..], &v[1..]));
                o[0] = e2 * (t * w[0] - v[0]);
                for i in 1..b.dim {
                    o[i] = e2 * (sign * t * w[i] + v[i]);
                }
            } else if inverse {
                for i in 0..b.dim {
                    o[i] = v[i] / (w[i] * w[i]);
                }
            } else {
                for i in 0..b.dim {
                    o[i] = v[i] * w[i] * w[i];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks() -> Vec<Block> {
        layout(&[Cone::NonNeg(2), Cone::Soc(3), Cone::Soc(4)])
    }

    #[test]
    fn nt_scaling_maps_z_and_s_to_lambda() {
        let b = blocks();
        let s = [1.0, 2.0, 3.0, 1.0, -2.0, 2.0, 0.5, 0.3, -1.0];
        let z = [0.5, 4.0, 1.5, -0.7, 0.2, 1.0, 0.1, 0.2, 0.3];
        assert!(min_eig(&b, &s) > 0.0 && min_eig(&b, &z) > 0.0);
        let nt = NtScaling::new(&b, &s, &z);
        let mut wz = [0.0; 9];
        let mut winv_s = [0.0; 9];
        nt.apply(&b, &z, &mut wz, false);
        nt.apply(&b, &s, &mut winv_s, true);
        for k in 0..9 {
            assert!((wz[k] - winv_s[k]).abs() < 1e-12, "{wz:?} {winv_s:?}");
        }
        // W² W⁻² = I and W W⁻¹ = I
        let v = [0.3, -1.0, 2.0, 0.1, 0.5, -0.2, 1.0, 0.0, 0.7];
        let (mut a, mut c) = ([0.0; 9], [0.0; 9]);
        nt.apply_sq(&b, &v, &mut a, true);
        nt.apply_sq(&b, &a, &mut c, false);
        for k in 0..9 {
            assert!((c[k] - v[k]).abs() < 1e-12);
        }
        nt.apply(&b, &v, &mut a, false);
        nt.apply(&b, &a, &mut c, false);
        let mut d = [0.0; 9];
        nt.apply_sq(&b, &v, &mut d, false);
        for k in 0..9 {
            assert!((c[k] - d[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn jordan_division_inverts_product() {
        let b = blocks();
        let l = [1.0, 2.0, 3.0, 1.0, -2.0, 2.0, 0.5, 0.3, -1.0];
        let v = [0.3, -1.0, 2.0, 0.1, 0.5, -0.2, 1.0, 0.0, 0.7];
        let mut x = [0.0; 9];
        let mut back = [0.0; 9];
        jordan_div(&b, &l, &v, &mut x);
        jordan_prod(&b, &l, &x, &mut back);
        for k in 0..9 {
            assert!((back[k] - v[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn step_to_boundary() {
        let b = layout(&[Cone::Soc(2)]);
        // (1, 0) + α(0, 1) leaves the cone at α = 1
        assert!((max_step(&b, &[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-15);
        assert!(max_step(&b, &[1.0, 0.0], &[1.0, 0.5]).is_infinite());
        let b = layout(&[Cone::Soc(3)]);
        let v = [2.0, 0.5, -0.3];
        let d = [-1.0, 0.7, 0.2];
        let a = max_step(&b, &v, &d);
        let p: Vec<f64> = v.iter().zip(&d).map(|(x, y)| x + a * y).collect();
        assert!((p[0] - norm(&p[1..])).abs() < 1e-12);
    }
}

//! Newton systems of the interior-point method.
//!
//! The system
//!
//! ```text
//! [ P  Aᵀ  Gᵀ  ] [x]   [r1]
//! [ A  0   0   ] [y] = [r2]
//! [ G  0  −W²  ] [z]   [r3]
//! ```
//!
//! is reduced by eliminating `z = W⁻²(G x − r3)` to the dense normal matrix
//! `M = P + GᵀW⁻²G + ρAᵀA + δI`, factored by Cholesky, and a Schur complement
//! `A M⁻¹ Aᵀ` for `y`. Each Lorentz block contributes
//! `η⁻²(G_kᵀ J G_k + 2 v vᵀ)` with `v = G_kᵀ J w̄`; the rank-one parts of
//! blocks with wide supports are stacked and added with one triangular
//! product. A few rounds of iterative refinement against the unregularized
//! system remove the effect of `ρ` and `δ`.

use faer::linalg::matmul::triangular::{matmul, BlockStructure};
use faer::linalg::solvers::{Llt, Solve};
use faer::{Accum, MatMut, MatRef, Par, Side};

use super::cones::{Block, NtScaling};
use super::SparseMatrix;

/// Rank-one terms with more nonzeros than this go through the dense
/// low-rank update.
const SPARSE_OUTER_MAX: usize = 64;
const REFINE_STEPS: usize = 8;

pub(crate) struct Kkt<'a> {
    q: &'a SparseMatrix,
    a: &'a SparseMatrix,
    g: &'a SparseMatrix,
    blocks: &'a [Block],
    n: usize,
    p: usize,
    rho: f64,
    delta: f64,
    /// Union of column supports per Lorentz block.
    soc_cols: Vec<Vec<usize>>,
    mat: Vec<f64>,
    dense_v: Vec<f64>,
    scratch: Vec<f64>,
    llt: Option<Llt<f64>>,
    minv_at: Vec<f64>,
    schur: Option<Llt<f64>>,
}

fn outer_lower(mat: &mut [f64], n: usize, cols: &[usize], vals: &[f64], w: f64) {
    let k = cols.len();
    if k == 0 || w == 0.0 {
        return;
    }
    let contiguous = cols[k - 1] - cols[0] == k - 1;
    for b in 0..k {
        let j = cols[b];
        let f = w * vals[b];
        if f == 0.0 {
            continue;
        }
        let base = j * n;
        if contiguous {
            let dst = &mut mat[base + j..base + cols[k - 1] + 1];
            for (d, v) in dst.iter_mut().zip(&vals[b..]) {
                *d += f * v;
            }
        } else {
            for a in b..k {
                mat[base + cols[a]] += f * vals[a];
            }
        }
    }
}

fn llt_solve(llt: &Llt<f64>, v: &mut [f64]) {
    let n = v.len();
    llt.solve_in_place(MatMut::from_column_major_slice_mut(v, n, 1));
}

fn factor(mat: &[f64], n: usize) -> Option<Llt<f64>> {
    MatRef::from_column_major_slice(mat, n, n).llt(Side::Lower).ok()
}

impl<'a> Kkt<'a> {
    pub fn new(q: &'a SparseMatrix, a: &'a SparseMatrix, g: &'a SparseMatrix, blocks: &'a [Block]) -> Self {
        let n = a.ncols;
        let soc_cols = blocks
            .iter()
            .map(|b| {
                if !b.soc {
                    return Vec::new();
                }
                let mut cols: Vec<usize> =
                    b.range().flat_map(|r| g.row(r).0.iter().copied()).collect();
                cols.sort_unstable();
                cols.dedup();
                cols
            })
            .collect();
        Kkt {
            q,
            a,
            g,
            blocks,
            n,
            p: a.nrows,
            rho: if a.nrows > 0 { 1.0 } else { 0.0 },
            delta: 1e-14,
            soc_cols,
            mat: vec![0.0; n * n],
            dense_v: Vec::new(),
            scratch: vec![0.0; n],
            llt: None,
            minv_at: Vec::new(),
            schur: None,
        }
    }

    /// Assembles and factors the normal matrix for scaling `nt`. Returns
    /// false when no regularization level makes it factorable.
    pub fn factor(&mut self, nt: &NtScaling) -> bool {
        let n = self.n;
        self.mat.iter_mut().for_each(|v| *v = 0.0);
        self.dense_v.clear();
        let mut n_dense = 0;
        for (k, b) in self.blocks.iter().enumerate() {
            if b.soc {
                let e2 = 1.0 / (nt.eta[k] * nt.eta[k]);
                let w = &nt.w[b.range()];
                for (i, r) in b.range().enumerate() {
                    let (cols, vals) = self.g.row(r);
                    outer_lower(&mut self.mat, n, cols, vals, if i == 0 { -e2 } else { e2 });
                }
                // v = G_kᵀ J w̄ on the block's support
                let support = &self.soc_cols[k];
                for &c in support {
                    self.scratch[c] = 0.0;
                }
                for (i, r) in b.range().enumerate() {
                    let f = if i == 0 { w[0] } else { -w[i] };
                    let (cols, vals) = self.g.row(r);
                    for (&c, &v) in cols.iter().zip(vals) {
                        self.scratch[c] += f * v;
                    }
                }
                if support.len() <= SPARSE_OUTER_MAX {
                    let vals: Vec<f64> = support.iter().map(|&c| self.scratch[c]).collect();
                    outer_lower(&mut self.mat, n, support, &vals, 2.0 * e2);
                } else {
                    let f = (2.0 * e2).sqrt();
                    let start = self.dense_v.len();
                    self.dense_v.resize(start + n, 0.0);
                    for &c in support {
                        self.dense_v[start + c] = f * self.scratch[c];
                    }
                    n_dense += 1;
                }
            } else {
                for r in b.range() {
                    let (cols, vals) = self.g.row(r);
                    let w = nt.w[r];
                    outer_lower(&mut self.mat, n, cols, vals, 1.0 / (w * w));
                }
            }
        }
        if n_dense > 0 {
            let v = MatRef::from_column_major_slice(&self.dense_v, n, n_dense);
            matmul(
                MatMut::from_column_major_slice_mut(&mut self.mat, n, n),
                BlockStructure::TriangularLower,
                Accum::Add,
                v,
                BlockStructure::Rectangular,
                v.transpose(),
                BlockStructure::Rectangular,
                1.0,
                Par::Seq,
            );
        }
        for r in 0..self.p {
            let (cols, vals) = self.a.row(r);
            outer_lower(&mut self.mat, n, cols, vals, self.rho);
        }
        for r in 0..n {
            let (cols, vals) = self.q.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if c <= r {
                    self.mat[c * n + r] += v;
                }
            }
        }
        let diag_max = (0..n).fold(1.0f64, |m, j| m.max(self.mat[j * n + j].abs()));
        let mut delta = self.delta * diag_max;
        for _ in 0..8 {
            for j in 0..n {
                self.mat[j * n + j] += delta;
            }
            if let Some(l) = factor(&self.mat, n) {
                self.llt = Some(l);
                return self.factor_schur();
            }
            for j in 0..n {
                self.mat[j * n + j] -= delta;
            }
            delta *= 100.0;
        }
        self.llt = None;
        false
    }

    fn factor_schur(&mut self) -> bool {
        let (n, p) = (self.n, self.p);
        if p == 0 {
            self.schur = None;
            return true;
        }
        let llt = self.llt.as_ref().expect("factored");
        self.minv_at = vec![0.0; n * p];
        for r in 0..p {
            let (cols, vals) = self.a.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                self.minv_at[r * n + c] = v;
            }
        }
        llt.solve_in_place(MatMut::from_column_major_slice_mut(&mut self.minv_at, n, p));
        let mut s = vec![0.0; p * p];
        for q in 0..p {
            let col = &self.minv_at[q * n..(q + 1) * n];
            for r in q..p {
                let (cols, vals) = self.a.row(r);
                s[q * p + r] = cols.iter().zip(vals).map(|(&c, &v)| v * col[c]).sum();
            }
        }
        let scale = (0..p).fold(1.0f64, |m, j| m.max(s[j * p + j].abs()));
        let mut delta = 1e-14 * scale;
        for _ in 0..6 {
            if let Some(l) = factor(&s, p) {
                self.schur = Some(l);
                return true;
            }
            for j in 0..p {
                s[j * p + j] += delta;
            }
            delta *= 100.0;
        }
        false
    }

    fn solve_once(&self, nt: &NtScaling, r1: &[f64], r2: &[f64], r3: &[f64]) -> Sol {
        let (n, p) = (self.n, self.p);
        let mut t3 = vec![0.0; r3.len()];
        nt.apply_sq(self.blocks, r3, &mut t3, true);
        let mut x = r1.to_vec();
        self.g.tmul_acc(&t3, &mut x, 1.0);
        if p > 0 {
            self.a.tmul_acc(r2, &mut x, self.rho);
        }
        llt_solve(self.llt.as_ref().expect("factored"), &mut x);
        let mut y = vec![0.0; p];
        if p > 0 {
            y = self.a.mul(&x);
            y.iter_mut().zip(r2).for_each(|(v, r)| *v -= r);
            llt_solve(self.schur.as_ref().expect("factored"), &mut y);
            for q in 0..p {
                let col = &self.minv_at[q * n..(q + 1) * n];
                x.iter_mut().zip(col).for_each(|(xi, c)| *xi -= c * y[q]);
            }
        }
        let mut gx = self.g.mul(&x);
        gx.iter_mut().zip(r3).for_each(|(v, r)| *v -= r);
        let mut z = vec![0.0; r3.len()];
        nt.apply_sq(self.blocks, &gx, &mut z, true);
        Sol { x, y, z }
    }

    fn residual(&self, nt: &NtScaling, u: &Sol, r: [&[f64]; 3]) -> ([Vec<f64>; 3], f64) {
        let mut e1 = r[0].to_vec();
        self.q.mul_acc(&u.x, &mut e1, -1.0);
        self.a.tmul_acc(&u.y, &mut e1, -1.0);
        self.g.tmul_acc(&u.z, &mut e1, -1.0);
        let mut e2 = r[1].to_vec();
        self.a.mul_acc(&u.x, &mut e2, -1.0);
        let mut w2z = vec![0.0; u.z.len()];
        nt.apply_sq(self.blocks, &u.z, &mut w2z, false);
        let mut e3 = r[2].to_vec();
        self.g.mul_acc(&u.x, &mut e3, -1.0);
        e3.iter_mut().zip(&w2z).for_each(|(e, w)| *e += w);
        // measure the third block in the symmetric scaling W⁻¹
        nt.apply(self.blocks, &e3, &mut w2z, true);
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let norm = inf(&e1).max(inf(&e2)).max(inf(&w2z));
        ([e1, e2, e3], norm)
    }

    /// Solves the system with iterative refinement.
    pub fn solve(&self, nt: &NtScaling, r1: &[f64], r2: &[f64], r3: &[f64]) -> Sol {
        let mut u = self.solve_once(nt, r1, r2, r3);
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut w3 = vec![0.0; r3.len()];
        nt.apply(self.blocks, r3, &mut w3, true);
        let target = 1e-15 * (1.0 + inf(r1).max(inf(r2)).max(inf(&w3)));
        let (mut e, mut err) = self.residual(nt, &u, [r1, r2, r3]);
        for _ in 0..REFINE_STEPS {
            if err <= target || !err.is_finite() {
                break;
            }
            let d = self.solve_once(nt, &e[0], &e[1], &e[2]);
            let cand = Sol {
                x: u.x.iter().zip(&d.x).map(|(a, b)| a + b).collect(),
                y: u.y.iter().zip(&d.y).map(|(a, b)| a + b).collect(),
                z: u.z.iter().zip(&d.z).map(|(a, b)| a + b).collect(),
            };
            let (e_new, err_new) = self.residual(nt, &cand, [r1, r2, r3]);
            if err_new >= err {
                log::trace!("kkt refinement stalled at {err:.2e}");
                break;
            }
            u = cand;
            e = e_new;
            err = err_new;
        }
        u
    }
}

pub(crate) struct Sol {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

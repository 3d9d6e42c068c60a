//! Problem reductions applied before the interior-point solve.
//!
//! * variables with equal bounds are fixed;
//! * equality rows with a single free entry fix that variable, repeatedly;
//! * columns that appear nowhere are fixed at their best bound (or the
//!   clamped minimizer of their own quadratic term);
//! * linearly dependent equality rows are dropped after a consistency check;
//! * the remaining finite bounds become one orthant block appended to `G`.
//!
//! The reduced problem has free variables only. [`Presolved::recover`]
//! maps a reduced primal-dual point back, recovering the multipliers of
//! eliminated singleton rows from column stationarity.

use serde::{Deserialize, Serialize};

use super::{Cone, ConicError, ConicProblem, SparseMatrix};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PresolveReport {
    pub n_before: usize,
    pub eq_before: usize,
    pub cone_rows_before: usize,
    pub fixed_by_bounds: usize,
    pub fixed_by_singleton_rows: usize,
    pub empty_columns: usize,
    pub empty_rows: usize,
    pub dependent_rows: usize,
    pub bound_rows: usize,
    pub n_after: usize,
    pub eq_after: usize,
    pub cone_rows_after: usize,
}

#[derive(Debug, Clone)]
pub struct Presolved {
    pub reduced: ConicProblem,
    pub report: PresolveReport,
    n: usize,
    m_eq: usize,
    m_cone: usize,
    fixed: Vec<Option<f64>>,
    /// Original index of each reduced variable.
    kept_cols: Vec<usize>,
    /// Original index of each reduced equality row.
    kept_rows: Vec<usize>,
    /// (row, column) of singleton eliminations, in elimination order.
    singletons: Vec<(usize, usize)>,
    /// Reduced row of each upper / lower bound, per reduced variable.
    bound_rows: Vec<(Option<usize>, Option<usize>)>,
    c: Vec<f64>,
    p: SparseMatrix,
    a: SparseMatrix,
    g: SparseMatrix,
}

const FEAS_TOL: f64 = 1e-9;

pub fn presolve(p: &ConicProblem) -> Result<Presolved, ConicError> {
    p.validate()?;
    let n = p.n();
    let m_eq = p.b.len();
    let m_cone = p.h.len();
    let mut report = PresolveReport {
        n_before: n,
        eq_before: m_eq,
        cone_rows_before: m_cone,
        ..Default::default()
    };

    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for j in 0..n {
        if p.lower[j] == p.upper[j] {
            fixed[j] = Some(p.lower[j]);
            report.fixed_by_bounds += 1;
        }
    }

    // singleton rows, to a fixed point
    let mut row_done = vec![false; m_eq];
    let mut singletons = Vec::new();
    loop {
        let mut changed = false;
        for r in 0..m_eq {
            if row_done[r] {
                continue;
            }
            let (cols, vals) = p.a.row(r);
            let mut rhs = p.b[r];
            let mut free = None;
            let mut n_free = 0;
            for (&c, &v) in cols.iter().zip(vals) {
                match fixed[c] {
                    Some(x) => rhs -= v * x,
                    None => {
                        n_free += 1;
                        free = Some((c, v));
                    }
                }
            }
            match (n_free, free) {
                (0, _) => {
                    if rhs.abs() > FEAS_TOL * (1.0 + p.b[r].abs()) {
                        return Err(ConicError::PresolveInfeasible(format!(
                            "equality row {r} reduces to 0 = {rhs}"
                        )));
                    }
                    row_done[r] = true;
                    report.empty_rows += 1;
                    changed = true;
                }
                (1, Some((c, v))) => {
                    let mut x = rhs / v;
                    let slack = FEAS_TOL * (1.0 + x.abs());
                    if x < p.lower[c] - slack || x > p.upper[c] + slack {
                        return Err(ConicError::PresolveInfeasible(format!(
                            "row {r} forces variable {c} to {x} outside [{}, {}]",
                            p.lower[c], p.upper[c]
                        )));
                    }
                    x = x.clamp(p.lower[c], p.upper[c]);
                    fixed[c] = Some(x);
                    row_done[r] = true;
                    singletons.push((r, c));
                    report.fixed_by_singleton_rows += 1;
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }

    // empty columns
    let mut used = vec![false; n];
    for r in (0..m_eq).filter(|&r| !row_done[r]) {
        p.a.row(r).0.iter().for_each(|&c| used[c] = true);
    }
    p.g.col_idx.iter().for_each(|&c| used[c] = true);
    for r in 0..n {
        let (cols, _) = p.p.row(r);
        if cols.iter().any(|&c| c != r && fixed[c].is_none()) {
            used[r] = true;
        }
    }
    for j in 0..n {
        if fixed[j].is_some() || used[j] {
            continue;
        }
        let (lo, hi) = (p.lower[j], p.upper[j]);
        // linear coefficient after substituting fixed neighbours in P
        let (cols, vals) = p.p.row(j);
        let mut c = p.c[j];
        let mut pjj = 0.0;
        for (&k, &v) in cols.iter().zip(vals) {
            if k == j {
                pjj = v;
            } else if let Some(xk) = fixed[k] {
                c += v * xk;
            }
        }
        let x = if pjj > 0.0 {
            (-c / pjj).clamp(lo, hi)
        } else if c > 0.0 {
            lo
        } else if c < 0.0 {
            hi
        } else {
            0.0f64.clamp(lo, hi)
        };
        if !x.is_finite() {
            return Err(ConicError::PresolveUnbounded(format!(
                "variable {j} appears in no constraint and has cost {c}"
            )));
        }
        fixed[j] = Some(x);
        report.empty_columns += 1;
    }

    let kept_cols: Vec<usize> = (0..n).filter(|&j| fixed[j].is_none()).collect();
    let mut col_map = vec![None; n];
    for (k, &j) in kept_cols.iter().enumerate() {
        col_map[j] = Some(k);
    }
    let nr = kept_cols.len();
    let xf: Vec<f64> = fixed.iter().map(|v| v.unwrap_or(0.0)).collect();

    // dependent rows among the survivors
    let candidates: Vec<usize> = (0..m_eq).filter(|&r| !row_done[r]).collect();
    let a_fixed = p.a.mul(&xf);
    let mut kept_rows = Vec::new();
    let mut basis: Vec<(Vec<f64>, f64)> = Vec::new();
    for &r in &candidates {
        let mut v = vec![0.0; nr];
        let (cols, vals) = p.a.row(r);
        for (&c, &val) in cols.iter().zip(vals) {
            if let Some(k) = col_map[c] {
                v[k] = val;
            }
        }
        let rhs = p.b[r] - a_fixed[r];
        let scale = super::cones::norm(&v).max(1.0);
        let mut beta = rhs;
        // two passes of Gram–Schmidt for stability
        for _ in 0..2 {
            for (q, bq) in &basis {
                let proj = super::cones::dot(q, &v);
                if proj != 0.0 {
                    v.iter_mut().zip(q).for_each(|(x, y)| *x -= proj * y);
                    beta -= proj * bq;
                }
            }
        }
        let nv = super::cones::norm(&v);
        if nv <= 1e-10 * scale {
            if beta.abs() > 1e-8 * (1.0 + rhs.abs()) {
                return Err(ConicError::PresolveInfeasible(format!(
                    "equality row {r} is a combination of others with a different right-hand side"
                )));
            }
            report.dependent_rows += 1;
        } else {
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push((v, beta / nv));
            kept_rows.push(r);
        }
    }

    let a_red = p.a.select(&kept_rows, &col_map, nr);
    let b_red: Vec<f64> = kept_rows.iter().map(|&r| p.b[r] - a_fixed[r]).collect();

    let all_rows: Vec<usize> = (0..m_cone).collect();
    let g_core = p.g.select(&all_rows, &col_map, nr);
    let g_fixed = p.g.mul(&xf);
    let mut h_red: Vec<f64> = (0..m_cone).map(|r| p.h[r] - g_fixed[r]).collect();
    let mut cones = p.cones.clone();

    // finite bounds as an orthant block
    let mut entries: Vec<(usize, usize, f64)> = g_core
        .to_triplets()
        .rows
        .iter()
        .zip(&g_core.col_idx)
        .zip(&g_core.values)
        .map(|((&r, &c), &v)| (r, c, v))
        .collect();
    let mut bound_rows = vec![(None, None); nr];
    let mut row = m_cone;
    for (k, &j) in kept_cols.iter().enumerate() {
        if p.upper[j].is_finite() {
            entries.push((row, k, 1.0));
            h_red.push(p.upper[j]);
            bound_rows[k].0 = Some(row);
            row += 1;
        }
        if p.lower[j].is_finite() {
            entries.push((row, k, -1.0));
            h_red.push(-p.lower[j]);
            bound_rows[k].1 = Some(row);
            row += 1;
        }
    }
    report.bound_rows = row - m_cone;
    if report.bound_rows > 0 {
        cones.push(Cone::NonNeg(report.bound_rows));
    }
    let g_red = SparseMatrix::from_triplets(row, nr, &entries);

    let pxf = p.p.mul(&xf);
    let c_red: Vec<f64> = kept_cols.iter().map(|&j| p.c[j] + pxf[j]).collect();
    let p_red = p.p.select(&kept_cols, &col_map, nr);
    let offset = p.objective_offset
        + p.c.iter().zip(&xf).map(|(a, b)| a * b).sum::<f64>()
        + 0.5 * pxf.iter().zip(&xf).map(|(a, b)| a * b).sum::<f64>();
    let names = if p.var_names.is_empty() {
        Vec::new()
    } else {
        kept_cols.iter().map(|&j| p.var_names[j].clone()).collect()
    };

    report.n_after = nr;
    report.eq_after = kept_rows.len();
    report.cone_rows_after = row;
    log::debug!("presolve: {report:?}");

    Ok(Presolved {
        reduced: ConicProblem {
            p: p_red,
            c: c_red,
            objective_offset: offset,
            a: a_red,
            b: b_red,
            g: g_red,
            h: h_red,
            cones,
            lower: vec![f64::NEG_INFINITY; nr],
            upper: vec![f64::INFINITY; nr],
            var_names: names,
        },
        report,
        n,
        m_eq,
        m_cone,
        fixed,
        kept_cols,
        kept_rows,
        singletons,
        bound_rows,
        c: p.c.clone(),
        p: p.p.clone(),
        a: p.a.clone(),
        g: p.g.clone(),
    })
}

impl Presolved {
    /// Maps a reduced point `(x, y, z, s)` back to the original problem.
    pub fn recover(
        &self,
        x_r: &[f64],
        y_r: &[f64],
        z_r: &[f64],
        s_r: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut x: Vec<f64> = self.fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
        for (k, &j) in self.kept_cols.iter().enumerate() {
            x[j] = x_r[k];
        }
        let z = z_r[..self.m_cone].to_vec();
        let s = s_r[..self.m_cone].to_vec();
        let mut y = vec![0.0; self.m_eq];
        for (k, &r) in self.kept_rows.iter().enumerate() {
            y[r] = y_r[k];
        }
        if !self.singletons.is_empty() {
            // stationarity of each eliminated column, latest elimination first
            let mut stat = self.c.clone();
            self.p.mul_acc(&x, &mut stat, 1.0);
            self.g.tmul_acc(&z, &mut stat, 1.0);
            self.a.tmul_acc(&y, &mut stat, 1.0);
            for &(r, j) in self.singletons.iter().rev() {
                let a_rj = self.a.get(r, j);
                let yr = -stat[j] / a_rj;
                let (cols, vals) = self.a.row(r);
                for (&c, &v) in cols.iter().zip(vals) {
                    stat[c] += v * yr;
                }
                y[r] = yr;
            }
        }
        debug_assert_eq!(x.len(), self.n);
        (x, y, z, s)
    }

    /// Bound multipliers `r` with `Px + c + Aᵀy + Gᵀz + r = 0`, given the
    /// reduced cone duals and the original stationarity vector
    /// `Px + c + Aᵀy + Gᵀz`.
    pub fn bound_duals(&self, z_r: &[f64], stat: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = stat.iter().map(|v| -v).collect();
        for (k, &j) in self.kept_cols.iter().enumerate() {
            let (up, lo) = self.bound_rows[k];
            let zu = up.map_or(0.0, |i| z_r.get(i).copied().unwrap_or(0.0));
            let zl = lo.map_or(0.0, |i| z_r.get(i).copied().unwrap_or(0.0));
            r[j] = zu - zl;
        }
        r
    }
}

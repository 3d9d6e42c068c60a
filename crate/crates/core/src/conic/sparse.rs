use serde::{Deserialize, Serialize};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

/// Coordinate form used by the JSON dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Sums duplicate entries and drops exact zeros. Panics on indices out
    /// of range.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in entries {
            assert!(r < nrows && c < ncols, "entry ({r}, {c}) outside {nrows}×{ncols}");
            per_row[r].push((c, v));
        }
        let mut m = SparseMatrix::zeros(nrows, ncols);
        for (r, mut row) in per_row.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    m.col_idx.push(c);
                    m.values.push(v);
                }
            }
            m.row_ptr[r + 1] = m.col_idx.len();
        }
        m
    }

    pub fn from_dense(nrows: usize, ncols: usize, row_major: &[f64]) -> Self {
        let entries: Vec<_> = (0..nrows)
            .flat_map(|r| (0..ncols).map(move |c| (r, c)))
            .map(|(r, c)| (r, c, row_major[r * ncols + c]))
            .collect();
        Self::from_triplets(nrows, ncols, &entries)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |k| vals[k])
    }

    /// `y += alpha · M x`.
    pub fn mul_acc(&self, x: &[f64], y: &mut [f64], alpha: f64) {
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            let (cols, vals) = self.row(r);
            let dot: f64 = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
            *yr += alpha * dot;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_acc(x, &mut y, 1.0);
        y
    }

    /// `y += alpha · Mᵀ x`.
    pub fn tmul_acc(&self, x: &[f64], y: &mut [f64], alpha: f64) {
        for (r, &xr) in x.iter().enumerate().take(self.nrows) {
            if xr == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += alpha * v * xr;
            }
        }
    }

    pub fn tmul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.tmul_acc(x, &mut y, 1.0);
        y
    }

    pub fn to_triplets(&self) -> Triplets {
        let mut t = Triplets {
            nrows: self.nrows,
            ncols: self.ncols,
            rows: Vec::with_capacity(self.nnz()),
            cols: self.col_idx.clone(),
            vals: self.values.clone(),
        };
        for r in 0..self.nrows {
            t.rows
                .extend(std::iter::repeat_n(r, self.row_ptr[r + 1] - self.row_ptr[r]));
        }
        t
    }

    pub fn from_coordinate(t: &Triplets) -> Result<Self, String> {
        if t.rows.len() != t.cols.len() || t.rows.len() != t.vals.len() {
            return Err("triplet arrays differ in length".into());
        }
        let mut entries = Vec::with_capacity(t.rows.len());
        for k in 0..t.rows.len() {
            if t.rows[k] >= t.nrows || t.cols[k] >= t.ncols {
                return Err(format!("entry {k} outside {}×{}", t.nrows, t.ncols));
            }
            entries.push((t.rows[k], t.cols[k], t.vals[k]));
        }
        Ok(Self::from_triplets(t.nrows, t.ncols, &entries))
    }

    /// Keeps the listed rows and columns (in the given order); `col_map[c]`
    /// is the new index of column `c`, if kept.
    pub fn select(&self, rows: &[usize], col_map: &[Option<usize>], ncols: usize) -> Self {
        let mut m = SparseMatrix::zeros(rows.len(), ncols);
        for (new_r, &r) in rows.iter().enumerate() {
            let (cols, vals) = self.row(r);
            let mut row: Vec<(usize, f64)> = cols
                .iter()
                .zip(vals)
                .filter_map(|(&c, &v)| col_map[c].map(|nc| (nc, v)))
                .collect();
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                m.col_idx.push(c);
                m.values.push(v);
            }
            m.row_ptr[new_r + 1] = m.col_idx.len();
        }
        m
    }

    /// Max absolute entry per column.
    pub fn col_max_abs(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.ncols];
        for (&c, &v) in self.col_idx.iter().zip(&self.values) {
            out[c] = out[c].max(v.abs());
        }
        out
    }

    pub fn row_max_abs(&self, r: usize) -> f64 {
        self.row(r).1.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `M ← diag(rs) · M · diag(cs)`.
    pub fn scale(&mut self, rs: &[f64], cs: &[f64]) {
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                self.values[k] *= rs[r] * cs[self.col_idx[k]];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 2, 2.0), (1, 0, -1.0), (1, 1, 0.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 2), 3.0);
        assert_eq!(m.mul(&[1.0, 1.0, 1.0]), vec![3.0, -1.0]);
        assert_eq!(m.tmul(&[1.0, 2.0]), vec![-2.0, 0.0, 3.0]);
        let back = SparseMatrix::from_coordinate(&m.to_triplets()).unwrap();
        assert_eq!(back, m);
    }
}

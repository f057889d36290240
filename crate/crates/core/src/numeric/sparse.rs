/// Row-compressed sparse matrix.
///
/// Constraint matrices in this crate are built row by row (one scenario cut,
/// one bound, one side constraint at a time) and only ever consumed row-wise,
/// so a CSR layout without a column index is all that is needed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(ncols: usize) -> Self {
        SparseMatrix {
            ncols,
            row_ptr: vec![0],
            col_idx: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Builds from dense rows; exact zeros are dropped.
    pub fn from_dense(rows: &[Vec<f64>], ncols: usize) -> Self {
        let mut m = SparseMatrix::new(ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "dense row has wrong length");
            m.push_row(r.iter().copied().enumerate());
        }
        m
    }

    /// Appends a row. Entries may arrive in any order; duplicates are summed.
    pub fn push_row<I: IntoIterator<Item = (usize, f64)>>(&mut self, entries: I) {
        let start = self.col_idx.len();
        for (c, v) in entries {
            assert!(c < self.ncols, "column {c} out of range {}", self.ncols);
            if v != 0.0 {
                self.col_idx.push(c);
                self.vals.push(v);
            }
        }
        // keep rows sorted and duplicate-free
        let mut row: Vec<(usize, f64)> = self.col_idx[start..]
            .iter()
            .copied()
            .zip(self.vals[start..].iter().copied())
            .collect();
        if row.windows(2).any(|w| w[0].0 >= w[1].0) {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            self.col_idx.truncate(start);
            self.vals.truncate(start);
            for (c, v) in merged {
                self.col_idx.push(c);
                self.vals.push(v);
            }
        }
        self.row_ptr.push(self.col_idx.len());
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.vals[a..b])
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
    }

    /// `y = M x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        (0..self.nrows()).map(|i| self.row_dot(i, x)).collect()
    }

    /// `y += Mᵀ u`
    pub fn mul_t_add(&self, u: &[f64], y: &mut [f64]) {
        debug_assert_eq!(u.len(), self.nrows());
        debug_assert_eq!(y.len(), self.ncols);
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * ui;
            }
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.nrows())
            .map(|i| {
                let mut r = vec![0.0; self.ncols];
                let (cols, vals) = self.row(i);
                for (&c, &v) in cols.iter().zip(vals) {
                    r[c] = v;
                }
                r
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

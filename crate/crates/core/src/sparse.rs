//! Compressed sparse row storage.

/// Row-compressed sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles a matrix row by row. Column indices must be `< n_cols`.
    pub fn from_rows<R, I>(n_cols: usize, rows: R) -> Self
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            for (c, v) in row {
                assert!(c < n_cols, "column {c} out of range for {n_cols} columns");
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows: row_ptr.len() - 1,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_cols(&self, row: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    pub fn row_values(&self, row: usize) -> &[f64] {
        &self.values[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_cols(row)
            .iter()
            .copied()
            .zip(self.row_values(row).iter().copied())
    }

    pub fn row_sum(&self, row: usize) -> f64 {
        self.row_values(row).iter().sum()
    }

    /// Dense copy, row-major. Intended for small matrices.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (r, dense) in out.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                dense[c] += v;
            }
        }
        out
    }

    /// Scales every row by `factor(row)`.
    pub fn scale_rows(&mut self, mut factor: impl FnMut(usize) -> f64) {
        for r in 0..self.n_rows {
            let f = factor(r);
            for v in &mut self.values[self.row_ptr[r]..self.row_ptr[r + 1]] {
                *v *= f;
            }
        }
    }

    /// `out = self * x` where `x` and `out` are row-major with `width` columns.
    pub fn mul_dense(&self, x: &[f64], width: usize, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols * width);
        debug_assert_eq!(out.len(), self.n_rows * width);
        for (r, acc) in out.chunks_exact_mut(width).enumerate() {
            acc.fill(0.0);
            for (c, w) in self.row(r) {
                let src = &x[c * width..(c + 1) * width];
                for (a, s) in acc.iter_mut().zip(src) {
                    *a += w * s;
                }
            }
        }
    }
}

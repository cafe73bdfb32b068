use serde::{Deserialize, Serialize};

use super::{DenseMatrix, KernelError};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseCsr {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseCsr {
    /// Validating constructor: row pointers nondecreasing, column indices
    /// strictly increasing within a row and in range, values finite.
    pub fn try_new(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, KernelError> {
        if row_ptr.len() != rows + 1
            || row_ptr[0] != 0
            || row_ptr[rows] != col_idx.len()
            || col_idx.len() != values.len()
        {
            return Err(KernelError::InvalidCsr(
                "row pointer / index length mismatch",
            ));
        }
        for r in 0..rows {
            if row_ptr[r] > row_ptr[r + 1] {
                return Err(KernelError::InvalidCsr("row pointers decrease"));
            }
            let idx = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(KernelError::InvalidCsr(
                    "column indices not strictly increasing",
                ));
            }
            if idx.iter().any(|&c| c >= cols) {
                return Err(KernelError::InvalidCsr("column index out of range"));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite("csr values"));
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets in any order; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self, KernelError> {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(KernelError::InvalidCsr("triplet out of range"));
            }
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self::try_new(rows, cols, row_ptr, col_idx, values)
    }

    /// Keeps the exact nonzero entries of `dense`.
    pub fn from_dense(dense: &DenseMatrix) -> Self {
        let mut triplets = Vec::new();
        for i in 0..dense.rows() {
            for (j, &v) in dense.row(i).iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dense.rows(), dense.cols(), triplets)
            .expect("dense entries are in range")
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out.set(r, c, v);
            }
        }
        out
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored `(col, value)` entries of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Stored value at `(r, c)`, or zero.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                triplets.push((c, r, v));
            }
        }
        Self::from_triplets(self.cols, self.rows, triplets).expect("transpose stays in range")
    }

    /// Sparse · dense product.
    pub fn spmm(&self, b: &DenseMatrix) -> Result<DenseMatrix, KernelError> {
        if self.cols != b.rows() {
            return Err(KernelError::ShapeMismatch {
                op: "spmm",
                left: (self.rows, self.cols),
                right: b.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, b.cols());
        for r in 0..self.rows {
            let out_row = out.row_mut(r);
            for (c, v) in self.row(r) {
                for (o, &x) in out_row.iter_mut().zip(b.row(c)) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    /// Gradient of `C = S·B` with respect to `B`: `Sᵀ·dC`.
    pub fn spmm_backward(&self, grad_out: &DenseMatrix) -> Result<DenseMatrix, KernelError> {
        if self.rows != grad_out.rows() {
            return Err(KernelError::ShapeMismatch {
                op: "spmm_backward",
                left: (self.rows, self.cols),
                right: grad_out.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.cols, grad_out.cols());
        for r in 0..self.rows {
            let g = grad_out.row(r);
            for (c, v) in self.row(r) {
                for (o, &x) in out.row_mut(c).iter_mut().zip(g) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v))
    }
}

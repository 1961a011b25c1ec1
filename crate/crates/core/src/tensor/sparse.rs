use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseCsr {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseCsr {
    pub fn new(rows: usize, cols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if row_ptr.len() != rows + 1 || row_ptr[0] != 0 || row_ptr[rows] != values.len() {
            return Err(Error::invalid("row_ptr does not describe the value array"));
        }
        if col_idx.len() != values.len() {
            return Err(Error::invalid("col_idx and values differ in length"));
        }
        for i in 0..rows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::invalid("row_ptr is decreasing"));
            }
            let cols_i = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols_i.iter().any(|&c| c >= cols) {
                return Err(Error::invalid("column index out of range"));
            }
            if cols_i.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("column indices not strictly increasing"));
            }
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds a matrix from `(row, col, value)` entries in any order.
    /// Duplicate coordinates are rejected.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|e| (e.0, e.1));
        if entries.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::invalid("duplicate coordinate"));
        }
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for &(r, c, v) in &entries {
            if r >= rows || c >= cols {
                return Err(Error::invalid("coordinate out of range"));
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self::new(rows, cols, row_ptr, col_idx, values)
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

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
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

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// Stored value at `(i, j)`, zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                out.set(i, j, v);
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            entries.extend(self.row(i).map(|(j, v)| (j, i, v)));
        }
        Self::from_triplets(self.cols, self.rows, entries).expect("transpose of a valid CSR is valid")
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| self.row(i).all(|(j, v)| (self.get(j, i) - v).abs() <= tol))
    }

    /// `self · dense`.
    pub fn spmm(&self, dense: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != dense.rows() {
            return Err(Error::shape("spmm", self.shape(), dense.shape()));
        }
        let mut out = DenseMatrix::zeros(self.rows, dense.cols());
        for i in 0..self.rows {
            let out_row = out.row_mut(i);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let (j, v) = (self.col_idx[k], self.values[k]);
                for (o, &d) in out_row.iter_mut().zip(dense.row(j)) {
                    *o += v * d;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · dense`, the adjoint used by the backward pass of [`spmm`](Self::spmm).
    pub fn spmm_transpose(&self, dense: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != dense.rows() {
            return Err(Error::shape("spmm_transpose", self.shape(), dense.shape()));
        }
        let mut out = DenseMatrix::zeros(self.cols, dense.cols());
        for i in 0..self.rows {
            let src = dense.row(i);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let (j, v) = (self.col_idx[k], self.values[k]);
                for (o, &d) in out.row_mut(j).iter_mut().zip(src) {
                    *o += v * d;
                }
            }
        }
        Ok(out)
    }
}

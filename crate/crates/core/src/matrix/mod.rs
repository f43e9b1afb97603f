//! Dense row-major matrices and the weighted regularized objective.
//!
//! [`DenseMatrix`] is the carrier for data, weights, factors and sketches.
//! Heavy decompositions (SVD, QR, Cholesky, symmetric eigen) go through
//! `nalgebra`; everything on the hot path of alternating minimization is
//! written directly against the row-major buffer.

mod io;
mod problem;
mod spectral;

pub use io::{read_binary, read_csv, read_matrix, write_binary, write_csv, write_matrix};
pub use problem::{
    hadamard, objective_column_form, objective_row_form, Factorization, WlraProblem,
};
pub use spectral::{
    numerical_rank, orthonormal_basis, rank_tolerance, singular_values, spectral_norm, stable_rank,
    statistical_dimension, statistical_dimension_from_singular_values, svd, symmetric_eigen,
    Svd,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WlraError};

/// Real matrix stored row-major. Entries are always finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Wraps a row-major buffer, validating its length and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(WlraError::DataLength {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(WlraError::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Internal constructor for buffers produced by finite arithmetic.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        debug_assert!(data.iter().all(|v| v.is_finite()), "non-finite entry");
        DenseMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        DenseMatrix::new(rows, cols, vec![value; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &v) in diag.iter().enumerate() {
            data[i * n + i] = v;
        }
        DenseMatrix::new(n, n, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix::new(rows, cols, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(WlraError::DataLength {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        DenseMatrix::new(rows.len(), cols, data)
    }

    /// Column vector (n×1).
    pub fn column_vector(v: &[f64]) -> Result<Self> {
        DenseMatrix::new(v.len(), 1, v.to_vec())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            let row = self.row(i);
            for (j, &v) in row.iter().enumerate() {
                out[j * self.rows + i] = v;
            }
        }
        DenseMatrix::from_vec_unchecked(self.cols, self.rows, out)
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(WlraError::shape("matmul", self.shape(), other.shape()));
        }
        let (n, m) = (self.rows, other.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let dst = &mut out[i * m..(i + 1) * m];
            for (p, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(p)) {
                    *d += a * b;
                }
            }
        }
        Ok(DenseMatrix::from_vec_unchecked(n, m, out))
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn transpose_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(WlraError::shape("transpose_matmul", self.shape(), other.shape()));
        }
        let (n, m) = (self.cols, other.cols);
        let mut out = vec![0.0; n * m];
        for p in 0..self.rows {
            let b = other.row(p);
            for (i, &a) in self.row(p).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, &bv) in out[i * m..(i + 1) * m].iter_mut().zip(b) {
                    *d += a * bv;
                }
            }
        }
        Ok(DenseMatrix::from_vec_unchecked(n, m, out))
    }

    /// Gram matrix `selfᵀ · self`.
    pub fn gram(&self) -> DenseMatrix {
        let k = self.cols;
        let mut out = vec![0.0; k * k];
        for p in 0..self.rows {
            let r = self.row(p);
            for i in 0..k {
                let a = r[i];
                if a == 0.0 {
                    continue;
                }
                for j in i..k {
                    out[i * k + j] += a * r[j];
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                out[i * k + j] = out[j * k + i];
            }
        }
        DenseMatrix::from_vec_unchecked(k, k, out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(WlraError::shape("matvec", self.shape(), (x.len(), 1)));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `selfᵀ · x`.
    pub fn transpose_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(WlraError::shape("transpose_matvec", self.shape(), (x.len(), 1)));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            axpy(xi, self.row(i), &mut out);
        }
        Ok(out)
    }

    fn zip_with(&self, other: &DenseMatrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(WlraError::shape(op, self.shape(), other.shape()));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(DenseMatrix::from_vec_unchecked(self.rows, self.cols, data))
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub(crate) fn elementwise(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix::from_vec_unchecked(self.rows, self.cols, self.data.iter().map(|v| v * s).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<DenseMatrix> {
        DenseMatrix::new(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    /// `self · diag(s)`: multiplies column `j` by `s[j]`.
    pub fn scale_columns(&self, s: &[f64]) -> Result<DenseMatrix> {
        if s.len() != self.cols {
            return Err(WlraError::shape("scale_columns", self.shape(), (s.len(), 1)));
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            for (v, &w) in out.row_mut(i).iter_mut().zip(s) {
                *v *= w;
            }
        }
        Ok(out)
    }

    /// `diag(s) · self`: multiplies row `i` by `s[i]`.
    pub fn scale_rows(&self, s: &[f64]) -> Result<DenseMatrix> {
        if s.len() != self.rows {
            return Err(WlraError::shape("scale_rows", self.shape(), (s.len(), 1)));
        }
        let mut out = self.clone();
        for (i, &w) in s.iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|v| *v *= w);
        }
        Ok(out)
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Result<DenseMatrix> {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            if i >= self.rows {
                return Err(WlraError::IndexOutOfRange { index: i, len: self.rows });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(DenseMatrix::from_vec_unchecked(idx.len(), self.cols, data))
    }

    pub fn select_columns(&self, idx: &[usize]) -> Result<DenseMatrix> {
        if let Some(&j) = idx.iter().find(|&&j| j >= self.cols) {
            return Err(WlraError::IndexOutOfRange { index: j, len: self.cols });
        }
        let mut data = Vec::with_capacity(idx.len() * self.rows);
        for i in 0..self.rows {
            let r = self.row(i);
            data.extend(idx.iter().map(|&j| r[j]));
        }
        Ok(DenseMatrix::from_vec_unchecked(self.rows, idx.len(), data))
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(WlraError::shape("vstack", self.shape(), other.shape()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(DenseMatrix::from_vec_unchecked(self.rows + other.rows, self.cols, data))
    }

    /// Places `other` to the right of `self`.
    pub fn hstack(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(WlraError::shape("hstack", self.shape(), other.shape()));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(DenseMatrix::from_vec_unchecked(self.rows, cols, data))
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Result<DenseMatrix> {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        DenseMatrix::new(r, c, data)
    }

    /// Largest absolute difference between corresponding entries.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

use crate::error::{Result, WlraError};

use super::DenseMatrix;

/// Thin SVD with singular values sorted in decreasing order.
#[derive(Clone, Debug)]
pub struct Svd {
    /// m×p left singular vectors, p = min(m, n).
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    /// p×n right singular vectors (as rows).
    pub v_t: DenseMatrix,
}

impl Svd {
    /// Number of singular values above [`rank_tolerance`].
    pub fn rank(&self) -> usize {
        let tol = self.tolerance();
        self.singular_values.iter().filter(|&&s| s > tol).count()
    }

    pub fn tolerance(&self) -> f64 {
        let dim = self.u.rows().max(self.v_t.cols());
        rank_tolerance(dim, self.singular_values.first().copied().unwrap_or(0.0))
    }
}

/// Singular values at or below `max(n, d) · σ₁ · 1e-12` count as zero.
pub fn rank_tolerance(max_dim: usize, sigma_max: f64) -> f64 {
    max_dim as f64 * sigma_max * 1e-12
}

pub fn svd(m: &DenseMatrix) -> Svd {
    if m.rows() == 0 || m.cols() == 0 {
        return Svd {
            u: DenseMatrix::zeros(m.rows(), 0),
            singular_values: Vec::new(),
            v_t: DenseMatrix::zeros(0, m.cols()),
        };
    }
    let dec = m.to_nalgebra().svd(true, true);
    let u = dec.u.as_ref().expect("u requested");
    let v_t = dec.v_t.as_ref().expect("v_t requested");
    Svd {
        u: DenseMatrix::from_nalgebra(u).expect("finite SVD"),
        singular_values: dec.singular_values.iter().copied().collect(),
        v_t: DenseMatrix::from_nalgebra(v_t).expect("finite SVD"),
    }
}

pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.to_nalgebra().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn spectral_norm(m: &DenseMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn numerical_rank(m: &DenseMatrix) -> usize {
    let s = singular_values(m);
    let tol = rank_tolerance(m.rows().max(m.cols()), s.first().copied().unwrap_or(0.0));
    s.iter().filter(|&&v| v > tol).count()
}

/// `Σᵢ 1/(1 + λ/σᵢ²)` over the numerically nonzero singular values.
pub fn statistical_dimension(m: &DenseMatrix, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(WlraError::param(format!("lambda must be >= 0, got {lambda}")));
    }
    let s = singular_values(m);
    Ok(statistical_dimension_from_singular_values(
        &s,
        lambda,
        m.rows().max(m.cols()),
    ))
}

pub fn statistical_dimension_from_singular_values(s: &[f64], lambda: f64, max_dim: usize) -> f64 {
    let tol = rank_tolerance(max_dim, s.iter().copied().fold(0.0, f64::max));
    s.iter()
        .filter(|&&v| v > tol)
        .map(|&v| 1.0 / (1.0 + lambda / (v * v)))
        .sum()
}

/// `‖M‖_F² / ‖M‖²`.
pub fn stable_rank(m: &DenseMatrix) -> Result<f64> {
    let top = spectral_norm(m);
    if top == 0.0 {
        return Err(WlraError::ZeroMatrix("stable rank"));
    }
    Ok(m.frobenius_norm_sq() / (top * top))
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn orthonormal_basis(m: &DenseMatrix) -> DenseMatrix {
    let dec = svd(m);
    let r = dec.rank();
    dec.u.select_columns(&(0..r).collect::<Vec<_>>()).expect("rank <= columns")
}

/// Eigen-decomposition of a symmetric matrix: eigenvalues ascending and the
/// matching eigenvectors as columns.
pub fn symmetric_eigen(m: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if m.rows() != m.cols() {
        return Err(WlraError::shape("symmetric_eigen", m.shape(), m.shape()));
    }
    let n = m.rows();
    let eig = m.to_nalgebra().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])])?;
    Ok((values, vectors))
}

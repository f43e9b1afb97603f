use serde::{Deserialize, Serialize};

use crate::error::{Result, WlraError};

use super::{numerical_rank, DenseMatrix};

/// Entrywise product `W ∘ M`.
pub fn hadamard(w: &DenseMatrix, m: &DenseMatrix) -> Result<DenseMatrix> {
    w.elementwise(m)
}

/// An instance of regularized weighted low rank approximation:
/// minimize `‖W ∘ (UV − A)‖_F² + λ‖U‖_F² + λ‖V‖_F²` over rank-`k` factors.
///
/// Inputs with fewer rows than columns are transposed on ingest so that
/// `n ≥ d` always holds; [`WlraProblem::transposed`] records this.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WlraProblem {
    a: DenseMatrix,
    w: DenseMatrix,
    k: usize,
    lambda: f64,
    epsilon: f64,
    transposed: bool,
}

impl WlraProblem {
    pub fn new(a: DenseMatrix, w: DenseMatrix, k: usize, lambda: f64, epsilon: f64) -> Result<Self> {
        if a.shape() != w.shape() {
            return Err(WlraError::shape("problem", a.shape(), w.shape()));
        }
        if a.rows() == 0 || a.cols() == 0 {
            return Err(WlraError::param("data matrix must be non-empty"));
        }
        for i in 0..w.rows() {
            if let Some(j) = w.row(i).iter().position(|&v| v < 0.0) {
                return Err(WlraError::NegativeEntry { row: i, col: j, value: w.get(i, j) });
            }
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(WlraError::param(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(WlraError::param(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        let transposed = a.rows() < a.cols();
        let (a, w) = if transposed { (a.transpose(), w.transpose()) } else { (a, w) };
        if k == 0 || k > a.cols() {
            return Err(WlraError::param(format!(
                "rank k = {k} must satisfy 1 <= k <= d = {}",
                a.cols()
            )));
        }
        Ok(WlraProblem { a, w, k, lambda, epsilon, transposed })
    }

    pub fn data(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn weights(&self) -> &DenseMatrix {
        &self.w
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn transposed(&self) -> bool {
        self.transposed
    }

    /// (n, d) after any ingest transpose.
    pub fn shape(&self) -> (usize, usize) {
        self.a.shape()
    }

    /// Numerical rank of `W`.
    pub fn weight_rank(&self) -> usize {
        numerical_rank(&self.w)
    }

    pub fn with_rank(&self, k: usize) -> Result<WlraProblem> {
        if k == 0 || k > self.a.cols() {
            return Err(WlraError::param(format!("rank {k} out of range")));
        }
        Ok(WlraProblem { k, ..self.clone() })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<WlraProblem> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(WlraError::param(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(WlraProblem { lambda, ..self.clone() })
    }

    /// `m · D_{W_{i,:}}`: scales column `j` of `m` by `W[i, j]`.
    pub fn row_scaled(&self, i: usize, m: &DenseMatrix) -> Result<DenseMatrix> {
        if i >= self.w.rows() {
            return Err(WlraError::IndexOutOfRange { index: i, len: self.w.rows() });
        }
        m.scale_columns(self.w.row(i))
    }

    /// `D_{W_{:,j}} · m`: scales row `p` of `m` by `W[p, j]`.
    pub fn col_scaled(&self, j: usize, m: &DenseMatrix) -> Result<DenseMatrix> {
        if j >= self.w.cols() {
            return Err(WlraError::IndexOutOfRange { index: j, len: self.w.cols() });
        }
        m.scale_rows(&self.w.column(j))
    }

    fn check_factors(&self, u: &DenseMatrix, v: &DenseMatrix) -> Result<()> {
        let (n, d) = self.shape();
        if u.rows() != n || v.cols() != d || u.cols() != v.rows() {
            return Err(WlraError::shape("factorization", u.shape(), v.shape()));
        }
        Ok(())
    }

    /// Weighted residual `‖W ∘ (UV − A)‖_F²` alone.
    pub fn weighted_residual(&self, u: &DenseMatrix, v: &DenseMatrix) -> Result<f64> {
        self.check_factors(u, v)?;
        let d = self.a.cols();
        let mut total = 0.0;
        let mut uv_row = vec![0.0; d];
        for i in 0..self.a.rows() {
            uv_row.iter_mut().for_each(|x| *x = 0.0);
            for (t, &ut) in u.row(i).iter().enumerate() {
                super::axpy(ut, v.row(t), &mut uv_row);
            }
            let (a, w) = (self.a.row(i), self.w.row(i));
            total += uv_row
                .iter()
                .zip(a)
                .zip(w)
                .map(|((p, a), w)| {
                    let r = w * (p - a);
                    r * r
                })
                .sum::<f64>();
        }
        Ok(total)
    }

    /// `‖W ∘ (UV − A)‖_F² + λ‖U‖_F² + λ‖V‖_F²`.
    pub fn objective(&self, u: &DenseMatrix, v: &DenseMatrix) -> Result<f64> {
        let residual = self.weighted_residual(u, v)?;
        Ok(residual + self.regularization(u, v))
    }

    pub fn regularization(&self, u: &DenseMatrix, v: &DenseMatrix) -> f64 {
        self.lambda * (u.frobenius_norm_sq() + v.frobenius_norm_sq())
    }

    pub fn weighted_objective(&self, f: &Factorization) -> Result<f64> {
        self.objective(&f.u, &f.v)
    }
}

/// Row-decomposed objective `Σᵢ ‖U_{i,:} V D_{W_{i,:}} − A_{i,:} D_{W_{i,:}}‖² + λ-terms`.
pub fn objective_row_form(p: &WlraProblem, u: &DenseMatrix, v: &DenseMatrix) -> Result<f64> {
    p.check_factors(u, v)?;
    let mut total = 0.0;
    for i in 0..p.shape().0 {
        let ui = DenseMatrix::new(1, u.cols(), u.row(i).to_vec())?;
        let fitted = p.row_scaled(i, &ui.matmul(v)?)?;
        let target = p.row_scaled(i, &p.a.select_rows(&[i])?)?;
        total += fitted.sub(&target)?.frobenius_norm_sq();
    }
    Ok(total + p.regularization(u, v))
}

/// Column-decomposed objective `Σⱼ ‖D_{W_{:,j}} U V_{:,j} − D_{W_{:,j}} A_{:,j}‖² + λ-terms`.
pub fn objective_column_form(p: &WlraProblem, u: &DenseMatrix, v: &DenseMatrix) -> Result<f64> {
    p.check_factors(u, v)?;
    let mut total = 0.0;
    for j in 0..p.shape().1 {
        let vj = v.select_columns(&[j])?;
        let fitted = p.col_scaled(j, &u.matmul(&vj)?)?;
        let target = p.col_scaled(j, &p.a.select_columns(&[j])?)?;
        total += fitted.sub(&target)?.frobenius_norm_sq();
    }
    Ok(total + p.regularization(u, v))
}

/// A candidate factor pair `(U, V)` with an optionally cached objective.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Factorization {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    pub objective: Option<f64>,
}

impl Factorization {
    pub fn new(u: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        if u.cols() != v.rows() {
            return Err(WlraError::shape("factorization", u.shape(), v.shape()));
        }
        Ok(Factorization { u, v, objective: None })
    }

    /// Builds the pair and caches its objective under `problem`.
    pub fn evaluated(problem: &WlraProblem, u: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        let mut f = Factorization::new(u, v)?;
        f.objective = Some(problem.objective(&f.u, &f.v)?);
        Ok(f)
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn product(&self) -> DenseMatrix {
        self.u.matmul(&self.v).expect("inner dimensions checked at construction")
    }

    /// Factors of the untransposed input: if the problem was transposed on
    /// ingest, `Aᵀ ≈ UV` means `A ≈ VᵀUᵀ`.
    pub fn in_original_orientation(&self, problem: &WlraProblem) -> Factorization {
        if problem.transposed() {
            Factorization {
                u: self.v.transpose(),
                v: self.u.transpose(),
                objective: self.objective,
            }
        } else {
            self.clone()
        }
    }
}

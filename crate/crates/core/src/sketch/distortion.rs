//! Distortion factors of a sketch on a subspace, and the conditioning
//! diagnostics behind sketched multiple ridge regression.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WlraError};
use crate::matrix::{orthonormal_basis, singular_values, spectral_norm, svd, symmetric_eigen, DenseMatrix};

use super::Sketch;

/// Tightest `K`, `κ` with `κ‖Mv‖² ≤ ‖SMv‖² ≤ K‖Mv‖²` for all `v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionFactors {
    pub upper: f64,
    pub lower: f64,
}

impl DistortionFactors {
    /// `c_S = max(K, 1/κ)`; infinite when `κ = 0`.
    pub fn condition(&self) -> f64 {
        let inv = if self.lower > 0.0 { 1.0 / self.lower } else { f64::INFINITY };
        self.upper.max(inv)
    }
}

/// Diagnostics of one sketch against one regularized regression `(M, b, λ)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DistortionDiagnostics {
    /// Upper distortion of the augmented sketch on `[M̂ b̂]`.
    pub upper: f64,
    /// Lower distortion of the augmented sketch on `[M̂ b̂]`.
    pub lower: f64,
    /// `Γ = ‖Û_bᵀ Ŝᵀ Ŝ Û_b − I‖`.
    pub gamma: f64,
    /// `c_h = c_S([M_h, b])`.
    pub head_condition: f64,
    /// `α = c_h (1 + Γ)`.
    pub alpha: f64,
    /// Largest singular value of `M`.
    pub sigma_max: f64,
    /// Number of singular directions of `M` with `σ² ≥ λ`.
    pub head_rank: usize,
}

pub fn distortion_factors(s: &Sketch, m: &DenseMatrix) -> Result<DistortionFactors> {
    if s.cols() != m.rows() {
        return Err(WlraError::shape("distortion_factors", (s.rows(), s.cols()), m.shape()));
    }
    if m.is_zero() {
        return Err(WlraError::ZeroMatrix("distortion factors"));
    }
    subspace_distortion(s, &orthonormal_basis(m))
}

/// Distortion on the span of the orthonormal columns of `q`.
fn subspace_distortion(s: &Sketch, q: &DenseMatrix) -> Result<DistortionFactors> {
    let r = q.cols();
    let sq = s.apply(q)?;
    let sv = singular_values(&sq);
    let upper = sv.first().map_or(0.0, |v| v * v);
    let lower = if s.rows() < r { 0.0 } else { sv.last().map_or(0.0, |v| v * v) };
    Ok(DistortionFactors { upper, lower })
}

/// Builds `M̂ = [M; √λ I]`, `b̂ = [b; 0]` and `Ŝ = diag(S, I)`, then measures
/// `Γ` over a basis of `[M̂ b̂]`, the head conditioning `c_h` of `[M_h, b]`
/// where `M_h` keeps the singular directions with `σ² ≥ λ`, and `α = c_h(1+Γ)`.
pub fn gamma_alpha_diagnostics(s: &Sketch, m: &DenseMatrix, b: &[f64], lambda: f64) -> Result<DistortionDiagnostics> {
    if !(lambda > 0.0) {
        return Err(WlraError::param("head/tail split needs lambda > 0"));
    }
    let (n, k) = m.shape();
    if b.len() != n {
        return Err(WlraError::shape("gamma_alpha_diagnostics", m.shape(), (b.len(), 1)));
    }
    if s.cols() != n {
        return Err(WlraError::shape("gamma_alpha_diagnostics", (s.rows(), s.cols()), m.shape()));
    }

    let m_hat = m.vstack(&DenseMatrix::identity(k).scale(lambda.sqrt()))?;
    let mut b_hat = b.to_vec();
    b_hat.resize(n + k, 0.0);
    let basis = orthonormal_basis(&m_hat.hstack(&DenseMatrix::column_vector(&b_hat)?)?);
    let top = basis.select_rows(&(0..n).collect::<Vec<_>>())?;
    let bottom = basis.select_rows(&(n..n + k).collect::<Vec<_>>())?;
    let sketched_top = s.apply(&top)?;
    let gram = sketched_top.gram().add(&bottom.gram())?;
    let dev = gram.sub(&DenseMatrix::identity(gram.rows()))?;
    let gamma = spectral_norm(&dev);
    let (eigs, _) = symmetric_eigen(&gram)?;
    let lower = eigs.first().copied().unwrap_or(0.0).max(0.0);
    let upper = eigs.last().copied().unwrap_or(0.0);

    let dec = svd(m);
    let tol = dec.tolerance();
    let head: Vec<usize> = dec
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &sv)| sv > tol && sv * sv >= lambda)
        .map(|(i, _)| i)
        .collect();
    let head_rank = head.len();
    let mut span = dec.u.select_columns(&head)?;
    if b.iter().any(|&v| v != 0.0) {
        span = span.hstack(&DenseMatrix::column_vector(b)?)?;
    }
    let head_condition = if span.cols() == 0 {
        1.0
    } else {
        distortion_factors(s, &span)?.condition()
    };

    Ok(DistortionDiagnostics {
        upper,
        lower,
        gamma,
        head_condition,
        alpha: head_condition * (1.0 + gamma),
        sigma_max: dec.singular_values.first().copied().unwrap_or(0.0),
        head_rank,
    })
}

/// `‖Aᵀ Sᵀ S B − Aᵀ B‖` (spectral norm).
pub fn amm_error(s: &Sketch, a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    if a.rows() != b.rows() || s.cols() != a.rows() {
        return Err(WlraError::shape("amm_error", a.shape(), b.shape()));
    }
    let sketched = s.apply(a)?.transpose_matmul(&s.apply(b)?)?;
    let exact = a.transpose_matmul(b)?;
    Ok(spectral_norm(&sketched.sub(&exact)?))
}

/// Failure threshold `γ·√((‖A‖² + ‖A‖_F²/K)(‖B‖² + ‖B‖_F²/K))`.
pub fn amm_bound(a: &DenseMatrix, b: &DenseMatrix, k: f64, gamma: f64) -> f64 {
    let sa = spectral_norm(a).powi(2);
    let sb = spectral_norm(b).powi(2);
    gamma * ((sa + a.frobenius_norm_sq() / k) * (sb + b.frobenius_norm_sq() / k)).sqrt()
}

/// `⌈c·(K + ln(1/ε̂))/γ²⌉` rows for the approximate-multiplication tail bound.
pub fn amm_sketch_size(k: f64, failure: f64, gamma: f64, c: f64) -> Result<usize> {
    if !(failure > 0.0 && failure < 1.0) || !(gamma > 0.0) || !(c > 0.0) || !(k > 0.0) {
        return Err(WlraError::param("amm_sketch_size needs K, c, γ > 0 and 0 < ε̂ < 1"));
    }
    Ok(((c * (k + (1.0 / failure).ln()) / (gamma * gamma)).ceil() as usize).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::SketchSpec;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn identity_and_scaled_identity() {
        let m = random(8, 3, 1);
        let f = distortion_factors(&Sketch::identity(8), &m).unwrap();
        assert_relative_eq!(f.upper, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.lower, 1.0, epsilon = 1e-12);
        let two = Sketch::from(DenseMatrix::identity(8).scale(2.0));
        let f = distortion_factors(&two, &m).unwrap();
        assert_relative_eq!(f.upper, 4.0, epsilon = 1e-12);
        assert_relative_eq!(f.lower, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn too_few_rows_forces_zero_lower_distortion() {
        let m = random(20, 4, 2);
        let s = SketchSpec::gaussian(3, 7).unwrap().realize(20);
        let f = distortion_factors(&s, &m).unwrap();
        assert_eq!(f.lower, 0.0);
        assert!(f.condition().is_infinite());
        assert!(distortion_factors(&s, &DenseMatrix::zeros(20, 2)).is_err());
    }

    #[test]
    fn identity_sketch_diagnostics() {
        let m = random(15, 4, 3);
        let b: Vec<f64> = (0..15).map(|i| (i as f64).cos()).collect();
        let d = gamma_alpha_diagnostics(&Sketch::identity(15), &m, &b, 0.5).unwrap();
        assert!(d.gamma < 1e-12);
        assert_relative_eq!(d.head_condition, 1.0, epsilon = 1e-12);
        assert_relative_eq!(d.alpha, 1.0, epsilon = 1e-12);
        assert!(gamma_alpha_diagnostics(&Sketch::identity(15), &m, &b, 0.0).is_err());
    }

    #[test]
    fn small_lambda_puts_everything_in_the_head() {
        let m = random(15, 4, 4);
        let b = vec![0.0; 15];
        let d = gamma_alpha_diagnostics(&Sketch::identity(15), &m, &b, 1e-8).unwrap();
        assert_eq!(d.head_rank, 4);
        let d = gamma_alpha_diagnostics(&Sketch::identity(15), &m, &b, 1e8).unwrap();
        assert_eq!(d.head_rank, 0);
    }

    #[test]
    fn amm_error_cases() {
        let a = random(30, 3, 5);
        let b = random(30, 2, 6);
        assert!(amm_error(&Sketch::identity(30), &a, &b).unwrap() < 1e-12);
        let s = SketchSpec::gaussian(10, 1).unwrap().realize(30);
        assert_eq!(amm_error(&s, &DenseMatrix::zeros(30, 3), &b).unwrap(), 0.0);
        assert!(amm_error(&s, &a, &random(29, 2, 1)).is_err());
    }
}

//! Preconditioned Richardson iteration `x_{i+1} = x_i − η B⁻¹(A x_i − b)`
//! for symmetric PSD `A`, `B` with `ker A = ker B` and `ηA ⪯ B ⪯ A`.

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WlraError};
use crate::matrix::{dot, norm_sq, symmetric_eigen, DenseMatrix};
use crate::rng::seeded_rng;
use crate::sketch::Sketch;

/// Constant `C` in the iteration budget `⌈C·ln(c_B/ε̂)/η⌉`.
///
/// With `ηA ⪯ B ⪯ A` every error mode contracts by at least `1 − η` per step
/// in the `A`-norm; converting to the Euclidean norm costs `√c_A ≤ √(c_B/η)`,
/// which `C = 2` covers.
pub const RICHARDSON_ITERATION_CONSTANT: f64 = 2.0;

const PROBE_COUNT: usize = 20;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RichardsonConfig {
    /// Step size and containment factor.
    pub eta: f64,
    pub max_iters: usize,
    /// Stop once `‖A x − b‖ ≤ tau`.
    pub tau: f64,
    /// Verify `ηA ⪯ B ⪯ A` through generalized eigenvalues rather than
    /// random Rayleigh-quotient probes.
    pub exact_containment_check: bool,
    pub probe_seed: u64,
}

impl RichardsonConfig {
    pub fn new(eta: f64, max_iters: usize, tau: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(WlraError::param(format!("eta must lie in (0, 1], got {eta}")));
        }
        if !(tau > 0.0) {
            return Err(WlraError::param(format!("tau must be positive, got {tau}")));
        }
        if max_iters == 0 {
            return Err(WlraError::param("max_iters must be positive"));
        }
        Ok(RichardsonConfig { eta, max_iters, tau, exact_containment_check: false, probe_seed: 0 })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RichardsonOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
    /// Set when a probe found `ηA ⪯ B ⪯ A` violated.
    pub containment_violated: bool,
}

/// Inverse (or pseudo-inverse on the range) of a symmetric PSD matrix.
#[derive(Clone, Debug)]
pub enum PsdInverse {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Pseudo { values: Vec<f64>, vectors: DenseMatrix, rank: usize },
}

impl PsdInverse {
    pub fn new(m: &DenseMatrix, what: &'static str) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(WlraError::shape("psd inverse", m.shape(), m.shape()));
        }
        if let Some(ch) = m.to_nalgebra().cholesky() {
            return Ok(PsdInverse::Cholesky(ch));
        }
        let (values, vectors) = symmetric_eigen(m)?;
        let top = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tol = top * 1e-10 * m.rows() as f64;
        if values.first().is_some_and(|&v| v < -tol) {
            return Err(WlraError::NotPositiveSemidefinite(what));
        }
        let rank = values.iter().filter(|&&v| v > tol).count();
        Ok(PsdInverse::Pseudo { values, vectors, rank })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match self {
            PsdInverse::Cholesky(ch) => ch
                .solve(&nalgebra::DVector::from_column_slice(rhs))
                .iter()
                .copied()
                .collect(),
            PsdInverse::Pseudo { values, vectors, rank } => {
                let n = vectors.rows();
                let mut x = vec![0.0; n];
                for c in n - rank..n {
                    let coef = (0..n).map(|i| vectors.get(i, c) * rhs[i]).sum::<f64>() / values[c];
                    for (i, xi) in x.iter_mut().enumerate() {
                        *xi += coef * vectors.get(i, c);
                    }
                }
                x
            }
        }
    }

    /// Orthonormal kernel basis (empty when invertible).
    fn kernel(&self) -> Vec<Vec<f64>> {
        match self {
            PsdInverse::Cholesky(_) => Vec::new(),
            PsdInverse::Pseudo { vectors, rank, .. } => {
                (0..vectors.rows() - rank).map(|c| vectors.column(c)).collect()
            }
        }
    }
}

/// Runs Richardson iteration from `x₀ = 0`.
pub fn richardson_solve(a: &DenseMatrix, b_pre: &DenseMatrix, rhs: &[f64], cfg: &RichardsonConfig) -> Result<RichardsonOutcome> {
    let n = a.rows();
    if a.cols() != n || b_pre.shape() != a.shape() || rhs.len() != n {
        return Err(WlraError::shape("richardson_solve", a.shape(), b_pre.shape()));
    }
    let a_inv = PsdInverse::new(a, "system matrix")?;
    let b_inv = PsdInverse::new(b_pre, "preconditioner")?;
    let (ka, kb) = (a_inv.kernel(), b_inv.kernel());
    if ka.len() != kb.len() || kb.iter().any(|v| norm_sq(&a.matvec(v).expect("square")).sqrt() > 1e-8 * a.max_abs().max(1.0)) {
        return Err(WlraError::KernelMismatch);
    }

    let containment_violated = if cfg.exact_containment_check {
        let (lo, hi) = containment_interval(a, b_pre)?;
        lo < cfg.eta * (1.0 - 1e-9) || hi > 1.0 + 1e-9
    } else {
        probe_containment(a, b_pre, cfg.eta, cfg.probe_seed)
    };
    if containment_violated {
        warn!("richardson: eta·A ⪯ B ⪯ A appears violated (eta = {})", cfg.eta);
    }

    Ok(iterate(a, &b_inv, rhs, cfg, containment_violated))
}

pub(crate) fn iterate(a: &DenseMatrix, b_inv: &PsdInverse, rhs: &[f64], cfg: &RichardsonConfig, containment_violated: bool) -> RichardsonOutcome {
    let n = a.rows();
    let mut x = vec![0.0; n];
    // residual r = A x − b
    let mut r: Vec<f64> = rhs.iter().map(|v| -v).collect();
    let mut residual_norm = norm_sq(&r).sqrt();
    let mut iterations = 0;
    while iterations < cfg.max_iters && residual_norm > cfg.tau {
        let step = b_inv.solve(&r);
        crate::matrix::axpy(-cfg.eta, &step, &mut x);
        let ax = a.matvec(&x).expect("square");
        for ((ri, axi), bi) in r.iter_mut().zip(&ax).zip(rhs) {
            *ri = axi - bi;
        }
        residual_norm = norm_sq(&r).sqrt();
        iterations += 1;
    }
    RichardsonOutcome {
        x,
        iterations,
        residual_norm,
        converged: residual_norm <= cfg.tau,
        containment_violated,
    }
}

/// Random Rayleigh-quotient probes of `ηA ⪯ B ⪯ A`; true on violation.
fn probe_containment(a: &DenseMatrix, b: &DenseMatrix, eta: f64, seed: u64) -> bool {
    let mut rng = seeded_rng(seed);
    let n = a.rows();
    for _ in 0..PROBE_COUNT {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let qa = dot(&v, &a.matvec(&v).expect("square"));
        let qb = dot(&v, &b.matvec(&v).expect("square"));
        let slack = 1e-9 * qa.abs().max(qb.abs()) + 1e-300;
        if qb > qa + slack || qb < eta * qa - slack {
            return true;
        }
    }
    false
}

/// Range `[lo, hi]` of `vᵀBv / vᵀAv` over `v ∉ ker A`; `ηA ⪯ B ⪯ A`
/// holds iff `lo ≥ η` and `hi ≤ 1`. Requires `A` positive definite.
pub fn containment_interval(a: &DenseMatrix, b: &DenseMatrix) -> Result<(f64, f64)> {
    let ch = a
        .to_nalgebra()
        .cholesky()
        .ok_or(WlraError::NotPositiveSemidefinite("system matrix (needs definiteness)"))?;
    let l = ch.l();
    // L⁻¹ B L⁻ᵀ
    let li_b = l.solve_lower_triangular(&b.to_nalgebra()).expect("nonsingular L");
    let m = l.solve_lower_triangular(&li_b.transpose()).expect("nonsingular L");
    let sym = DenseMatrix::from_nalgebra(&((&m + m.transpose()) * 0.5))?;
    let (vals, _) = symmetric_eigen(&sym)?;
    Ok((vals[0], vals[vals.len() - 1]))
}

/// `⌈C·ln(c_B/ε̂)/η⌉` with `C = RICHARDSON_ITERATION_CONSTANT`.
pub fn richardson_iteration_bound(condition_b: f64, target: f64, eta: f64) -> usize {
    let log = (condition_b.max(1.0) / target).ln().max(1.0);
    (RICHARDSON_ITERATION_CONSTANT * log / eta).ceil() as usize
}

/// Coefficients `c_m` with `x_t = Σ_m c_m (B⁻¹A)^m B⁻¹ b`.
///
/// Unrolling the recursion gives `x_t = η Σ_{j<t} (I − ηB⁻¹A)^j B⁻¹ b`, and
/// collecting powers yields `c_m = η (−η)^m · binom(t, m+1)`.
pub fn richardson_polynomial(eta: f64, t: usize) -> Vec<f64> {
    let mut coeffs = Vec::with_capacity(t);
    let mut binom = t as f64; // binom(t, 1)
    let mut pow = 1.0;
    for m in 0..t {
        coeffs.push(eta * pow * binom);
        pow *= -eta;
        binom = binom * (t - m - 1) as f64 / (m + 2) as f64;
    }
    coeffs
}

/// Evaluates `Σ_m c_m (B⁻¹A)^m B⁻¹ b` by Horner's rule.
pub fn evaluate_richardson_polynomial(a: &DenseMatrix, b_pre: &DenseMatrix, rhs: &[f64], coeffs: &[f64]) -> Result<Vec<f64>> {
    let b_inv = PsdInverse::new(b_pre, "preconditioner")?;
    let z = b_inv.solve(rhs);
    let mut y = vec![0.0; rhs.len()];
    for &c in coeffs.iter().rev() {
        let gy = b_inv.solve(&a.matvec(&y)?);
        y = gy.iter().zip(&z).map(|(g, zi)| g + c * zi).collect();
    }
    Ok(y)
}

/// A preconditioner together with the containment factor it is built for.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Preconditioner {
    pub matrix: DenseMatrix,
    pub eta: f64,
    /// `max(ln n, 1)`.
    pub log_factor: f64,
}

impl Preconditioner {
    /// `λ_max / λ_min` over the nonzero spectrum.
    pub fn condition(&self) -> Result<f64> {
        let (vals, _) = symmetric_eigen(&self.matrix)?;
        let top = vals.last().copied().unwrap_or(0.0);
        let tol = top * 1e-12 * vals.len() as f64;
        let low = vals.iter().copied().find(|&v| v > tol).unwrap_or(top);
        Ok(if low > 0.0 { top / low } else { f64::INFINITY })
    }

    pub fn iteration_bound(&self, target: f64) -> Result<usize> {
        Ok(richardson_iteration_bound(self.condition()?, target, self.eta))
    }
}

/// `B = (1/log n) · R S Sᵀ Rᵀ` with `R` the factor scaled by the uniform
/// weight lower bound `l_W`, and `η = 1/(log(n)² · u_W/l_W)`.
///
/// The factor may be `k × m` (a `V`-like factor, sketch applied on the right)
/// or `m × k` (a `U`-like factor, sketch applied on the left); the orientation
/// is chosen by matching `m` against the sketch's column count. `log n` is
/// clamped below at 1.
pub fn build_preconditioner(factor: &DenseMatrix, s: &Sketch, l_w: f64, u_w: f64, n: usize) -> Result<Preconditioner> {
    if !(l_w > 0.0) || !(u_w >= l_w) || !u_w.is_finite() {
        return Err(WlraError::param(format!("need 0 < l_W <= u_W, got l_W = {l_w}, u_W = {u_w}")));
    }
    if n == 0 {
        return Err(WlraError::param("n must be positive"));
    }
    let tall = if factor.cols() == s.cols() {
        factor.transpose()
    } else if factor.rows() == s.cols() {
        factor.clone()
    } else {
        return Err(WlraError::shape("build_preconditioner", factor.shape(), (s.rows(), s.cols())));
    };
    let log_factor = (n as f64).ln().max(1.0);
    let sketched = s.apply(&tall.scale(l_w))?;
    let matrix = sketched.gram().scale(1.0 / log_factor);
    let eta = 1.0 / (log_factor * log_factor * (u_w / l_w));
    Ok(Preconditioner { matrix, eta, log_factor })
}

//! Synthetic data and weight matrices.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WlraError};
use crate::matrix::DenseMatrix;
use crate::rng::stream_rng;

/// Leading singular value of [`gen_synthetic`] matrices.
pub const DOMINANT_SINGULAR_VALUE: f64 = 10_000.0;

/// `m × c` matrix with orthonormal columns, Haar distributed up to signs.
pub fn random_orthonormal(m: usize, c: usize, seed: u64, stream: u64) -> Result<DenseMatrix> {
    if c > m {
        return Err(WlraError::param(format!("cannot fit {c} orthonormal columns in dimension {m}")));
    }
    let mut rng = stream_rng(seed, stream);
    let g = nalgebra::DMatrix::<f64>::from_fn(m, c, |_, _| rng.sample(StandardNormal));
    let q = g.qr().q();
    DenseMatrix::from_nalgebra(&q.columns(0, c).into_owned())
}

/// `A = Q Σ Rᵀ` with random orthonormal `Q`, `R`, `σ₁ = 10⁴` and the other
/// `min(n, d) − 1` singular values equal, chosen so that
/// `Σ 1/(1 + λ/σᵢ²) = sd_target`.
pub fn gen_synthetic(n: usize, d: usize, sd_target: f64, lambda: f64, seed: u64) -> Result<DenseMatrix> {
    let m = n.min(d);
    if m == 0 {
        return Err(WlraError::param("dimensions must be positive"));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(WlraError::param(format!("lambda must be positive, got {lambda}")));
    }
    if !(sd_target >= 1.0) || sd_target > m as f64 {
        return Err(WlraError::param(format!(
            "statistical dimension target {sd_target} is infeasible for min(n, d) = {m}"
        )));
    }
    let s1 = DOMINANT_SINGULAR_VALUE;
    let lead = 1.0 / (1.0 + lambda / (s1 * s1));
    let mut sigma = vec![s1; 1];
    if m > 1 {
        // Each remaining direction contributes x = σ²/(σ² + λ).
        let x = ((sd_target - lead) / (m - 1) as f64).max(0.0);
        if x >= 1.0 {
            return Err(WlraError::param(format!("statistical dimension target {sd_target} is infeasible")));
        }
        let tail = (lambda * x / (1.0 - x)).sqrt();
        sigma.extend(std::iter::repeat_n(tail, m - 1));
    }
    let q = random_orthonormal(n, m, seed, 0)?;
    let r = random_orthonormal(d, m, seed, 1)?;
    q.scale_columns(&sigma)?.matmul(&r.transpose())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightProfile {
    /// 1 w.p. 0.8, 0.1 w.p. 0.15, 0.01 w.p. 0.05.
    DensePaper,
    /// 1 w.p. 0.9, else 0.
    BinaryPaper,
    /// Every entry equal to the given value.
    Uniform { value: f64 },
    Custom { values: Vec<f64>, probabilities: Vec<f64> },
}

impl WeightProfile {
    /// `(values, probabilities)` of the entry distribution.
    pub fn distribution(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            WeightProfile::DensePaper => (vec![1.0, 0.1, 0.01], vec![0.8, 0.15, 0.05]),
            WeightProfile::BinaryPaper => (vec![1.0, 0.0], vec![0.9, 0.1]),
            WeightProfile::Uniform { value } => (vec![*value], vec![1.0]),
            WeightProfile::Custom { values, probabilities } => (values.clone(), probabilities.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (values, probs) = self.distribution();
        if values.is_empty() || values.len() != probs.len() {
            return Err(WlraError::param("weight profile needs one probability per value"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(WlraError::param("weight values must be finite and nonnegative"));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(WlraError::param("weight probabilities must be nonnegative and sum to 1"));
        }
        Ok(())
    }
}

impl std::str::FromStr for WeightProfile {
    type Err = WlraError;

    /// `dense`, `binary`, `uniform:<v>` or `custom:v1=p1,v2=p2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let bad = |what: &str| WlraError::param(format!("bad weight profile `{s}`: {what}"));
        let profile = match lower.split_once(':') {
            None if lower == "dense" || lower == "densepaper" => WeightProfile::DensePaper,
            None if lower == "binary" || lower == "binarypaper" => WeightProfile::BinaryPaper,
            Some(("uniform", v)) => WeightProfile::Uniform { value: v.parse().map_err(|_| bad("value"))? },
            Some(("custom", body)) => {
                let mut values = Vec::new();
                let mut probabilities = Vec::new();
                for pair in body.split(',') {
                    let (v, p) = pair.split_once('=').ok_or_else(|| bad("expected value=probability"))?;
                    values.push(v.trim().parse().map_err(|_| bad("value"))?);
                    probabilities.push(p.trim().parse().map_err(|_| bad("probability"))?);
                }
                WeightProfile::Custom { values, probabilities }
            }
            _ => return Err(bad("unknown kind")),
        };
        profile.validate()?;
        Ok(profile)
    }
}

/// i.i.d. entries drawn from `profile`.
pub fn gen_weights(n: usize, d: usize, profile: &WeightProfile, seed: u64) -> Result<DenseMatrix> {
    profile.validate()?;
    let (values, probs) = profile.distribution();
    let mut rng = stream_rng(seed, 0);
    DenseMatrix::from_fn(n, d, |_, _| {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (v, p) in values.iter().zip(&probs) {
            acc += p;
            if u < acc {
                return *v;
            }
        }
        *values.last().expect("nonempty")
    })
}

/// Weights `W = YZ` with entrywise positive random factors of rank `r`.
pub fn gen_low_rank_weights(n: usize, d: usize, r: usize, seed: u64) -> Result<DenseMatrix> {
    let mut rng = stream_rng(seed, 0);
    let y = DenseMatrix::from_fn(n, r, |_, _| rng.random_range(0.1..1.0))?;
    let z = DenseMatrix::from_fn(r, d, |_, _| rng.random_range(0.1..1.0))?;
    y.matmul(&z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::statistical_dimension;

    #[test]
    fn synthetic_hits_target() {
        let a = gen_synthetic(120, 40, 2.0, 1.0, 3).unwrap();
        let sd = statistical_dimension(&a, 1.0).unwrap();
        assert!((1.75..=2.25).contains(&sd), "{sd}");
        let b = gen_synthetic(60, 30, 1.0, 1.0, 4).unwrap();
        let sd = statistical_dimension(&b, 1.0).unwrap();
        assert!((1.0..=1.25).contains(&sd), "{sd}");
        let s = crate::matrix::singular_values(&b);
        assert!(s[1] <= 1e-3);
        assert_eq!(gen_synthetic(30, 10, 2.0, 1.0, 9).unwrap(), gen_synthetic(30, 10, 2.0, 1.0, 9).unwrap());
    }

    #[test]
    fn synthetic_rejects_infeasible_targets() {
        assert!(gen_synthetic(10, 5, 6.0, 1.0, 1).is_err());
        assert!(gen_synthetic(10, 5, 0.5, 1.0, 1).is_err());
        assert!(gen_synthetic(10, 5, 2.0, 0.0, 1).is_err());
    }

    #[test]
    fn weight_profiles() {
        let w = gen_weights(40, 30, &WeightProfile::BinaryPaper, 1).unwrap();
        assert!(w.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
        let w = gen_weights(5, 4, &WeightProfile::Uniform { value: 1.0 }, 1).unwrap();
        assert!(w.as_slice().iter().all(|&v| v == 1.0));
        assert_eq!("uniform:2".parse::<WeightProfile>().unwrap(), WeightProfile::Uniform { value: 2.0 });
        assert_eq!(
            "custom:1=0.5,0=0.5".parse::<WeightProfile>().unwrap(),
            WeightProfile::Custom { values: vec![1.0, 0.0], probabilities: vec![0.5, 0.5] }
        );
        assert!("custom:1=0.5".parse::<WeightProfile>().is_err());
        assert!("gamma".parse::<WeightProfile>().is_err());
    }

    #[test]
    fn orthonormal_columns() {
        let q = random_orthonormal(20, 5, 2, 0).unwrap();
        assert!(q.gram().max_abs_diff(&DenseMatrix::identity(5)).unwrap() < 1e-12);
        assert!(random_orthonormal(3, 4, 2, 0).is_err());
    }
}

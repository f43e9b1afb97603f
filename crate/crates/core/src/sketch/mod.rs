//! Random sketching operators.
//!
//! A [`SketchSpec`] names a distribution, a row count `ℓ` and a seed. Realizing
//! it against an ambient dimension `n` gives an `ℓ × n` operator [`Sketch`].
//! Column `j` of the operator depends only on `(seed, j)`, so realizations are
//! reproducible and may be generated or applied in any order.

mod distortion;

pub use distortion::{
    amm_bound, amm_error, amm_sketch_size, distortion_factors, gamma_alpha_diagnostics,
    DistortionDiagnostics, DistortionFactors,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WlraError};
use crate::matrix::DenseMatrix;
use crate::rng::{derive_seed, splitmix64, stream_rng};

/// Default constant `c` in `ℓ = ⌈c·(s + ln(1/ε))/ε⌉`. See the calibration
/// sweep in `harness::verify::calibrate_sketch_constant`.
pub const DEFAULT_SKETCH_CONSTANT: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SketchKind {
    /// i.i.d. N(0, 1/ℓ) entries.
    Gaussian,
    /// One ±1 per column in a uniformly random row.
    CountSketch,
}

impl std::str::FromStr for SketchKind {
    type Err = WlraError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(SketchKind::Gaussian),
            "countsketch" | "count-sketch" | "count_sketch" => Ok(SketchKind::CountSketch),
            other => Err(WlraError::param(format!("unknown sketch kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchSpec {
    pub kind: SketchKind,
    pub rows: usize,
    pub seed: u64,
}

impl SketchSpec {
    pub fn new(kind: SketchKind, rows: usize, seed: u64) -> Result<Self> {
        if rows == 0 {
            return Err(WlraError::param("sketch must have at least one row"));
        }
        Ok(SketchSpec { kind, rows, seed })
    }

    pub fn gaussian(rows: usize, seed: u64) -> Result<Self> {
        SketchSpec::new(SketchKind::Gaussian, rows, seed)
    }

    pub fn count_sketch(rows: usize, seed: u64) -> Result<Self> {
        SketchSpec::new(SketchKind::CountSketch, rows, seed)
    }

    /// Same distribution and size with a different seed.
    pub fn reseeded(&self, seed: u64) -> SketchSpec {
        SketchSpec { seed, ..*self }
    }

    /// The `ℓ × n` operator this spec denotes.
    pub fn realize(&self, n: usize) -> Sketch {
        match self.kind {
            SketchKind::Gaussian => {
                let l = self.rows;
                let scale = 1.0 / (l as f64).sqrt();
                let mut data = vec![0.0; l * n];
                for j in 0..n {
                    let mut rng = stream_rng(self.seed, j as u64);
                    for i in 0..l {
                        let z: f64 = rng.sample(StandardNormal);
                        data[i * n + j] = z * scale;
                    }
                }
                Sketch::Dense(DenseMatrix::from_vec_unchecked(l, n, data))
            }
            SketchKind::CountSketch => {
                let l = self.rows as u128;
                let mut buckets = Vec::with_capacity(n);
                let mut signs = Vec::with_capacity(n);
                for j in 0..n {
                    let h = derive_seed(self.seed, j as u64);
                    buckets.push(((h as u128 * l) >> 64) as usize);
                    signs.push(if splitmix64(h) & 1 == 0 { 1.0 } else { -1.0 });
                }
                Sketch::CountSketch { rows: self.rows, buckets, signs }
            }
        }
    }
}

/// `ℓ × n` dense matrix realization of `spec`.
pub fn sample_sketch(spec: &SketchSpec, n: usize) -> Result<DenseMatrix> {
    if n == 0 {
        return Err(WlraError::param("ambient dimension must be positive"));
    }
    Ok(spec.realize(n).to_dense())
}

/// `⌈c·(s + ln(1/ε))/ε⌉` with the default constant.
pub fn recommended_sketch_size(s: f64, epsilon: f64) -> Result<usize> {
    recommended_sketch_size_with(s, epsilon, DEFAULT_SKETCH_CONSTANT)
}

pub fn recommended_sketch_size_with(s: f64, epsilon: f64, c: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(WlraError::param(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(s >= 0.0) || !s.is_finite() {
        return Err(WlraError::param(format!("statistical dimension must be >= 0, got {s}")));
    }
    if !(c > 0.0) {
        return Err(WlraError::param(format!("sketch constant must be positive, got {c}")));
    }
    let l = (c * (s + (1.0 / epsilon).ln()) / epsilon).ceil();
    Ok((l as usize).max(1))
}

/// A realized sketching operator.
#[derive(Clone, Debug)]
pub enum Sketch {
    Dense(DenseMatrix),
    CountSketch {
        rows: usize,
        buckets: Vec<usize>,
        signs: Vec<f64>,
    },
}

impl From<DenseMatrix> for Sketch {
    fn from(m: DenseMatrix) -> Self {
        Sketch::Dense(m)
    }
}

impl Sketch {
    pub fn identity(n: usize) -> Sketch {
        Sketch::Dense(DenseMatrix::identity(n))
    }

    pub fn rows(&self) -> usize {
        match self {
            Sketch::Dense(m) => m.rows(),
            Sketch::CountSketch { rows, .. } => *rows,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Sketch::Dense(m) => m.cols(),
            Sketch::CountSketch { buckets, .. } => buckets.len(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Sketch::Dense(m) => m.clone(),
            Sketch::CountSketch { rows, buckets, signs } => {
                let n = buckets.len();
                let mut m = DenseMatrix::zeros(*rows, n);
                for (j, (&b, &s)) in buckets.iter().zip(signs).enumerate() {
                    m.set(b, j, s);
                }
                m
            }
        }
    }

    /// `S · M`.
    pub fn apply(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if m.rows() != self.cols() {
            return Err(WlraError::shape("sketch apply", (self.rows(), self.cols()), m.shape()));
        }
        Ok(self.apply_weighted_unchecked(m, None))
    }

    /// `S · x`.
    pub fn apply_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let col = DenseMatrix::column_vector(x)?;
        Ok(self.apply(&col)?.into_vec())
    }

    /// `S · D_w · M` without forming `D_w M`.
    pub fn apply_weighted(&self, m: &DenseMatrix, weights: &[f64]) -> Result<DenseMatrix> {
        if m.rows() != self.cols() || weights.len() != m.rows() {
            return Err(WlraError::shape("sketch apply", (self.rows(), self.cols()), m.shape()));
        }
        Ok(self.apply_weighted_unchecked(m, Some(weights)))
    }

    pub(crate) fn apply_weighted_unchecked(&self, m: &DenseMatrix, weights: Option<&[f64]>) -> DenseMatrix {
        let c = m.cols();
        let mut out = DenseMatrix::zeros(self.rows(), c);
        let weight = |j: usize| weights.map_or(1.0, |w| w[j]);
        match self {
            Sketch::CountSketch { buckets, signs, .. } => {
                for j in 0..m.rows() {
                    let w = weight(j) * signs[j];
                    if w == 0.0 {
                        continue;
                    }
                    crate::matrix::axpy(w, m.row(j), out.row_mut(buckets[j]));
                }
            }
            Sketch::Dense(s) => {
                let n = s.cols();
                for j in 0..n {
                    let w = weight(j);
                    if w == 0.0 {
                        continue;
                    }
                    let src = m.row(j);
                    for i in 0..s.rows() {
                        let coef = s.get(i, j) * w;
                        if coef != 0.0 {
                            crate::matrix::axpy(coef, src, out.row_mut(i));
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_sketch_has_one_unit_entry_per_column() {
        let s = sample_sketch(&SketchSpec::count_sketch(7, 3).unwrap(), 50).unwrap();
        for j in 0..50 {
            let col = s.column(j);
            assert_eq!(col.iter().filter(|v| **v != 0.0).count(), 1);
            assert_eq!(col.iter().map(|v| v.abs()).sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn realization_is_deterministic() {
        for kind in [SketchKind::Gaussian, SketchKind::CountSketch] {
            let spec = SketchSpec::new(kind, 5, 99).unwrap();
            let a = sample_sketch(&spec, 30).unwrap();
            let b = sample_sketch(&spec, 30).unwrap();
            assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
            assert_ne!(a, sample_sketch(&spec.reseeded(100), 30).unwrap());
        }
    }

    #[test]
    fn prefix_columns_do_not_depend_on_n() {
        let spec = SketchSpec::gaussian(4, 1).unwrap();
        let small = sample_sketch(&spec, 10).unwrap();
        let big = sample_sketch(&spec, 20).unwrap();
        assert_eq!(small, big.select_columns(&(0..10).collect::<Vec<_>>()).unwrap());
    }

    #[test]
    fn gaussian_variance_is_one_over_rows() {
        let l = 1000;
        let s = sample_sketch(&SketchSpec::gaussian(l, 5).unwrap(), 1).unwrap();
        let col = s.column(0);
        let mean = col.iter().sum::<f64>() / l as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (l as f64 - 1.0);
        assert!(var >= 0.9 / l as f64 && var <= 1.1 / l as f64, "variance {var}");
    }

    #[test]
    fn sketch_size_formula() {
        assert_eq!(recommended_sketch_size(2.0, 0.5).unwrap(), 22);
        assert_eq!(recommended_sketch_size(0.0, 0.5).unwrap(), 6);
        assert!(recommended_sketch_size(1.0, 0.0).is_err());
        assert!(recommended_sketch_size(1.0, 1.0).is_err());
        assert!(recommended_sketch_size(-1.0, 0.5).is_err());
    }

    #[test]
    fn weighted_application_matches_dense_products() {
        let m = DenseMatrix::from_fn(12, 3, |i, j| (i as f64 - 2.0 * j as f64).sin()).unwrap();
        let w: Vec<f64> = (0..12).map(|i| (i % 4) as f64 * 0.5).collect();
        let dw = DenseMatrix::from_diagonal(&w).unwrap();
        for spec in [SketchSpec::gaussian(5, 2).unwrap(), SketchSpec::count_sketch(5, 2).unwrap()] {
            let s = spec.realize(12);
            let expected = s.to_dense().matmul(&dw.matmul(&m).unwrap()).unwrap();
            assert!(s.apply_weighted(&m, &w).unwrap().max_abs_diff(&expected).unwrap() < 1e-12);
            let plain = s.to_dense().matmul(&m).unwrap();
            assert!(s.apply(&m).unwrap().max_abs_diff(&plain).unwrap() < 1e-12);
        }
        assert!(Sketch::identity(3).apply(&m).is_err());
    }
}

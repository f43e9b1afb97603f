//! Rounding nonnegative weight factors to powers of `1 + ε`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WlraError};
use crate::matrix::DenseMatrix;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundedWeights {
    pub y: DenseMatrix,
    pub z: DenseMatrix,
    /// `Y′Z′`.
    pub w: DenseMatrix,
    pub epsilon: f64,
    /// Distinct rows of `W′`.
    pub distinct_rows: usize,
    /// Distinct columns of `W′`.
    pub distinct_cols: usize,
}

/// Nearest power of `1 + ε` in the exponent: `(1+ε)^round(ln x / ln(1+ε))`.
/// Zero maps to zero.
pub fn round_to_power(x: f64, epsilon: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let base = 1.0 + epsilon;
    let e = (x.ln() / base.ln()).round();
    base.powi(e as i32)
}

/// Rounds every entry of `Y` and `Z`, forms `W′ = Y′Z′` and checks
/// `(1−ε)²W ≤ W′ ≤ (1+ε)²W` entrywise against `W = YZ`.
pub fn round_weight_factors(y: &DenseMatrix, z: &DenseMatrix, epsilon: f64) -> Result<RoundedWeights> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(WlraError::param(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if y.cols() != z.rows() {
        return Err(WlraError::shape("round_weight_factors", y.shape(), z.shape()));
    }
    for m in [y, z] {
        for i in 0..m.rows() {
            if let Some(j) = m.row(i).iter().position(|&v| v < 0.0) {
                return Err(WlraError::NegativeEntry { row: i, col: j, value: m.get(i, j) });
            }
        }
    }
    let yp = y.map(|v| round_to_power(v, epsilon))?;
    let zp = z.map(|v| round_to_power(v, epsilon))?;
    let w = y.matmul(z)?;
    let wp = yp.matmul(&zp)?;
    let (lo, hi) = ((1.0 - epsilon).powi(2), (1.0 + epsilon).powi(2));
    for (orig, new) in w.as_slice().iter().zip(wp.as_slice()) {
        if !(lo * orig <= *new && *new <= hi * orig) {
            return Err(WlraError::param(format!(
                "rounded weight {new} escapes [{}, {}]",
                lo * orig,
                hi * orig
            )));
        }
    }
    let distinct_rows = count_distinct((0..wp.rows()).map(|i| wp.row(i).to_vec()));
    let distinct_cols = count_distinct((0..wp.cols()).map(|j| wp.column(j)));
    Ok(RoundedWeights { y: yp, z: zp, w: wp, epsilon, distinct_rows, distinct_cols })
}

pub(crate) fn count_distinct(lines: impl Iterator<Item = Vec<f64>>) -> usize {
    lines
        .map(|l| l.iter().map(|v| v.to_bits()).collect::<Vec<u64>>())
        .collect::<HashSet<_>>()
        .len()
}

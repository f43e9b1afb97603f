//! Rank-reducing projection built from a low-rank weight matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WlraError};
use crate::matrix::{svd, DenseMatrix};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankReduction {
    /// `n × n` orthogonal projection.
    pub projection: DenseMatrix,
    /// `rank(P)`.
    pub rank: usize,
    /// Numerical rank `r` of `W`.
    pub weight_rank: usize,
}

/// Factors `W ≈ YZ` by a rank-`r` SVD with `Y = U_r Σ_r`, stacks the `r`
/// blocks `S″ D_{Y_{:,t}}` and returns the projection onto the span of the
/// stack's right singular vectors.
pub fn rank_reduce_projection(w: &DenseMatrix, spp: &DenseMatrix) -> Result<RankReduction> {
    let n = w.rows();
    if spp.cols() != n {
        return Err(WlraError::shape("rank_reduce_projection", w.shape(), spp.shape()));
    }
    let dec = svd(w);
    let r = dec.rank();
    let l = spp.rows();
    let mut stacked = DenseMatrix::zeros(r * l, n);
    for t in 0..r {
        let sigma = dec.singular_values[t];
        for i in 0..l {
            for p in 0..n {
                stacked.set(t * l + i, p, spp.get(i, p) * dec.u.get(p, t) * sigma);
            }
        }
    }
    let basis = if r == 0 {
        DenseMatrix::zeros(n, 0)
    } else {
        let s = svd(&stacked);
        let keep: Vec<usize> = (0..s.rank()).collect();
        s.v_t.select_rows(&keep)?.transpose()
    };
    let rank = basis.cols();
    let projection = if rank == 0 {
        DenseMatrix::zeros(n, n)
    } else {
        basis.matmul(&basis.transpose())?
    };
    Ok(RankReduction { projection, rank, weight_rank: r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::{sample_sketch, SketchSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(0.0..1.0)).unwrap()
    }

    #[test]
    fn rank_one_weights_give_at_most_l() {
        let w = random(30, 1, 1).matmul(&random(1, 10, 2)).unwrap();
        let s = sample_sketch(&SketchSpec::gaussian(4, 3).unwrap(), 30).unwrap();
        let red = rank_reduce_projection(&w, &s).unwrap();
        assert_eq!(red.weight_rank, 1);
        assert!(red.rank <= 4);
        let p = &red.projection;
        assert!(p.matmul(p).unwrap().max_abs_diff(p).unwrap() < 1e-9);
        assert!(p.max_abs_diff(&p.transpose()).unwrap() < 1e-12);
    }

    #[test]
    fn identity_sketch_projects_onto_support() {
        let mut w = random(8, 2, 4).matmul(&random(2, 5, 5)).unwrap();
        for j in 0..5 {
            w.set(3, j, 0.0);
            w.set(6, j, 0.0);
        }
        let red = rank_reduce_projection(&w, &DenseMatrix::identity(8)).unwrap();
        let mut expected = DenseMatrix::identity(8);
        expected.set(3, 3, 0.0);
        expected.set(6, 6, 0.0);
        assert_eq!(red.rank, 6);
        assert!(red.projection.max_abs_diff(&expected).unwrap() < 1e-9);
    }

    #[test]
    fn shape_mismatch() {
        assert!(rank_reduce_projection(&random(5, 3, 1), &DenseMatrix::identity(4)).is_err());
    }
}

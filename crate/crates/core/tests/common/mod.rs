//! Independent numerical oracles for the integration tests. Nothing here
//! calls into the library's decompositions.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wlra::DenseMatrix;

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal)).unwrap()
}

pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi)).unwrap()
}

pub fn to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
pub fn jacobi_eigenvalues(sym: &[Vec<f64>]) -> Vec<f64> {
    let n = sym.len();
    let mut a = sym.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut e: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Squared singular values of `m`, descending, via Jacobi on `MᵀM`.
pub fn squared_singular_values(m: &DenseMatrix) -> Vec<f64> {
    let c = m.cols();
    let gram: Vec<Vec<f64>> = (0..c)
        .map(|i| (0..c).map(|j| (0..m.rows()).map(|r| m.get(r, i) * m.get(r, j)).sum()).collect())
        .collect();
    let mut e = jacobi_eigenvalues(&gram);
    e.reverse();
    e.into_iter().map(|v| v.max(0.0)).collect()
}

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &v)| {
        let mut r = row.clone();
        r.push(v);
        r
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// `argmin ‖Mx − b‖² + λ‖x‖²` through explicitly formed normal equations.
pub fn ridge_oracle(m: &DenseMatrix, b: &[f64], lambda: f64) -> Vec<f64> {
    let k = m.cols();
    let mut g = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for r in 0..m.rows() {
        for i in 0..k {
            rhs[i] += m.get(r, i) * b[r];
            for j in 0..k {
                g[i][j] += m.get(r, i) * m.get(r, j);
            }
        }
    }
    for (i, row) in g.iter_mut().enumerate() {
        row[i] += lambda;
    }
    solve_dense(&g, &rhs)
}

/// `‖W ∘ (UV − A)‖_F² + λ(‖U‖_F² + ‖V‖_F²)` by explicit triple loops.
pub fn objective_oracle(a: &DenseMatrix, w: &DenseMatrix, u: &DenseMatrix, v: &DenseMatrix, lambda: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let p: f64 = (0..u.cols()).map(|t| u.get(i, t) * v.get(t, j)).sum();
            let r = w.get(i, j) * (p - a.get(i, j));
            total += r * r;
        }
    }
    let norm = |m: &DenseMatrix| m.as_slice().iter().map(|x| x * x).sum::<f64>();
    total + lambda * (norm(u) + norm(v))
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 { s[m] } else { 0.5 * (s[m - 1] + s[m]) }
}

//! Regularized least squares: exact, sketch-and-solve, and preconditioned
//! Richardson iteration.

mod richardson;

pub use richardson::{
    build_preconditioner, containment_interval, evaluate_richardson_polynomial,
    richardson_iteration_bound, richardson_polynomial, richardson_solve, Preconditioner,
    PsdInverse, RichardsonConfig, RichardsonOutcome, RICHARDSON_ITERATION_CONSTANT,
};
pub(crate) use richardson::iterate;

use crate::error::{Result, WlraError};
use crate::matrix::{norm_sq, symmetric_eigen, DenseMatrix};
use crate::sketch::Sketch;

/// `min_x ‖Mx − b‖² + λ‖x‖²`.
#[derive(Clone, Debug)]
pub struct RidgeProblem {
    m: DenseMatrix,
    b: Vec<f64>,
    lambda: f64,
}

impl RidgeProblem {
    /// `lambda = 0` is accepted; only the exact solver is meaningful then,
    /// and it returns the minimum-norm least-squares solution.
    pub fn new(m: DenseMatrix, b: Vec<f64>, lambda: f64) -> Result<Self> {
        if b.len() != m.rows() {
            return Err(WlraError::shape("ridge problem", m.shape(), (b.len(), 1)));
        }
        if let Some(pos) = b.iter().position(|v| !v.is_finite()) {
            return Err(WlraError::NonFinite { row: pos, col: 0 });
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(WlraError::param(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(RidgeProblem { m, b, lambda })
    }

    pub fn design(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn target(&self) -> &[f64] {
        &self.b
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `‖Mx − b‖² + λ‖x‖²`.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        let mx = self.m.matvec(x)?;
        let resid: f64 = mx.iter().zip(&self.b).map(|(p, b)| (p - b) * (p - b)).sum();
        Ok(resid + self.lambda * norm_sq(x))
    }

    /// `‖S(Mx − b)‖² + λ‖x‖²`.
    pub fn sketched_objective(&self, s: &Sketch, x: &[f64]) -> Result<f64> {
        let mx = self.m.matvec(x)?;
        let r: Vec<f64> = mx.iter().zip(&self.b).map(|(p, b)| p - b).collect();
        Ok(norm_sq(&s.apply_vec(&r)?) + self.lambda * norm_sq(x))
    }

    /// Gradient `Mᵀ(Mx − b) + λx` (half of the true gradient).
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mx = self.m.matvec(x)?;
        let r: Vec<f64> = mx.iter().zip(&self.b).map(|(p, b)| p - b).collect();
        let mut g = self.m.transpose_matvec(&r)?;
        crate::matrix::axpy(self.lambda, x, &mut g);
        Ok(g)
    }
}

/// Solves `(G + λI)x = rhs` for symmetric PSD `G`.
///
/// Uses a Cholesky factorization; when that fails (only possible for
/// `λ = 0` and singular `G`) the minimum-norm solution through the
/// pseudo-inverse is returned instead.
pub(crate) fn solve_normal_equations(gram: &DenseMatrix, rhs: &[f64], lambda: f64) -> Vec<f64> {
    let k = gram.rows();
    if k == 0 {
        return Vec::new();
    }
    let mut sys = gram.to_nalgebra();
    for i in 0..k {
        sys[(i, i)] += lambda;
    }
    let b = nalgebra::DVector::from_column_slice(rhs);
    if lambda > 0.0 {
        if let Some(ch) = sys.clone().cholesky() {
            return ch.solve(&b).iter().copied().collect();
        }
    }
    pseudo_inverse_solve(&DenseMatrix::from_nalgebra(&sys).expect("finite system"), rhs)
}

fn pseudo_inverse_solve(sym: &DenseMatrix, rhs: &[f64]) -> Vec<f64> {
    let (vals, vecs) = symmetric_eigen(sym).expect("square system");
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = top * 1e-12 * sym.rows() as f64;
    let k = sym.rows();
    let mut x = vec![0.0; k];
    for (c, &val) in vals.iter().enumerate() {
        if val <= tol {
            continue;
        }
        let coef: f64 = (0..k).map(|i| vecs.get(i, c) * rhs[i]).sum::<f64>() / val;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += coef * vecs.get(i, c);
        }
    }
    x
}

/// Normal equations for `S·D_w·[M | b]`: returns `(PᵀP, Pᵀt)` where
/// `P = S D_w M` and `t = S D_w b`. With no sketch, `S = I`.
pub(crate) fn weighted_normal_equations(
    design: &DenseMatrix,
    target: &[f64],
    weights: Option<&[f64]>,
    sketch: Option<&Sketch>,
) -> (DenseMatrix, Vec<f64>) {
    let k = design.cols();
    match sketch {
        Some(s) => {
            let aug = design
                .hstack(&DenseMatrix::from_vec_unchecked(target.len(), 1, target.to_vec()))
                .expect("row counts agree");
            let y = s.apply_weighted_unchecked(&aug, weights);
            split_augmented_gram(&y.gram(), k)
        }
        None => {
            let mut gram = vec![0.0; k * k];
            let mut rhs = vec![0.0; k];
            for p in 0..design.rows() {
                let w = weights.map_or(1.0, |w| w[p]);
                if w == 0.0 {
                    continue;
                }
                let w2 = w * w;
                let r = design.row(p);
                for i in 0..k {
                    let a = w2 * r[i];
                    if a == 0.0 {
                        continue;
                    }
                    rhs[i] += a * target[p];
                    for j in i..k {
                        gram[i * k + j] += a * r[j];
                    }
                }
            }
            for i in 0..k {
                for j in 0..i {
                    gram[i * k + j] = gram[j * k + i];
                }
            }
            (DenseMatrix::from_vec_unchecked(k, k, gram), rhs)
        }
    }
}

fn split_augmented_gram(g: &DenseMatrix, k: usize) -> (DenseMatrix, Vec<f64>) {
    let idx: Vec<usize> = (0..k).collect();
    let gram = g.select_rows(&idx).and_then(|m| m.select_columns(&idx)).expect("k <= k+1");
    let rhs = (0..k).map(|i| g.get(i, k)).collect();
    (gram, rhs)
}

pub fn ridge_solve(p: &RidgeProblem) -> Result<Vec<f64>> {
    let (gram, rhs) = weighted_normal_equations(&p.m, &p.b, None, None);
    Ok(solve_normal_equations(&gram, &rhs, p.lambda))
}

/// Exact minimizer of `‖S(My − b)‖² + λ‖y‖²`.
pub fn sketched_ridge_solve(p: &RidgeProblem, s: &Sketch) -> Result<Vec<f64>> {
    if s.cols() != p.m.rows() {
        return Err(WlraError::shape("sketched_ridge_solve", (s.rows(), s.cols()), p.m.shape()));
    }
    let (gram, rhs) = weighted_normal_equations(&p.m, &p.b, None, Some(s));
    Ok(solve_normal_equations(&gram, &rhs, p.lambda))
}

/// `Σᵢ f_i(y⁽ⁱ⁾) / Σᵢ f_i(x⁽ⁱ⁾)` where `f_i` is the unsketched objective,
/// `x⁽ⁱ⁾` its minimizer and `y⁽ⁱ⁾` the minimizer under the shared sketch.
pub fn batch_objective_ratio(problems: &[RidgeProblem], s: &Sketch) -> Result<f64> {
    let first = problems
        .first()
        .ok_or_else(|| WlraError::param("batch_objective_ratio needs at least one problem"))?;
    let n = first.m.rows();
    let (mut sketched, mut exact) = (0.0, 0.0);
    for p in problems {
        if p.m.rows() != n {
            return Err(WlraError::shape("batch_objective_ratio", first.m.shape(), p.m.shape()));
        }
        exact += p.objective(&ridge_solve(p)?)?;
        sketched += p.objective(&sketched_ridge_solve(p, s)?)?;
    }
    if exact == 0.0 {
        return Ok(if sketched == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(sketched / exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::SketchSpec;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(n: usize, k: usize, lambda: f64, seed: u64) -> RidgeProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DenseMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0)).unwrap();
        let b = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        RidgeProblem::new(m, b, lambda).unwrap()
    }

    #[test]
    fn scalar_example() {
        let m = DenseMatrix::column_vector(&[1.0, 0.0]).unwrap();
        let p = RidgeProblem::new(m, vec![1.0, 1.0], 1.0).unwrap();
        assert_relative_eq!(ridge_solve(&p).unwrap()[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_target_gives_zero() {
        let p = random_problem(6, 3, 0.3, 1);
        let p = RidgeProblem::new(p.m.clone(), vec![0.0; 6], 0.3).unwrap();
        assert!(ridge_solve(&p).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_vanishes_at_solution() {
        let p = random_problem(20, 5, 0.7, 2);
        let x = ridge_solve(&p).unwrap();
        let g = norm_sq(&p.gradient(&x).unwrap()).sqrt();
        let scale = norm_sq(&p.m.transpose_matvec(&p.b).unwrap()).sqrt() + p.lambda * norm_sq(&x).sqrt();
        assert!(g <= 1e-8 * scale);
    }

    #[test]
    fn rank_deficient_unregularized_gives_min_norm() {
        // Two identical columns: min-norm solution splits the weight evenly.
        let m = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let p = RidgeProblem::new(m, vec![2.0, 4.0], 0.0).unwrap();
        let x = ridge_solve(&p).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn identity_and_zero_sketches() {
        let p = random_problem(12, 4, 0.5, 3);
        let x = ridge_solve(&p).unwrap();
        let y = sketched_ridge_solve(&p, &Sketch::identity(12)).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
        let zero = Sketch::from(DenseMatrix::zeros(3, 12));
        assert!(sketched_ridge_solve(&p, &zero).unwrap().iter().all(|&v| v == 0.0));
        assert!(sketched_ridge_solve(&p, &Sketch::identity(11)).is_err());
    }

    #[test]
    fn batch_ratio_trivial_cases() {
        let probs: Vec<_> = (0..4).map(|i| random_problem(10, 3, 0.2, 10 + i)).collect();
        assert_relative_eq!(batch_objective_ratio(&probs, &Sketch::identity(10)).unwrap(), 1.0, epsilon = 1e-10);
        let zeros: Vec<_> = probs
            .iter()
            .map(|p| RidgeProblem::new(p.m.clone(), vec![0.0; 10], 0.2).unwrap())
            .collect();
        let s = SketchSpec::gaussian(3, 1).unwrap().realize(10);
        assert_eq!(batch_objective_ratio(&zeros, &s).unwrap(), 1.0);
        assert!(batch_objective_ratio(&[], &s).is_err());
        let ratio = batch_objective_ratio(&probs, &s).unwrap();
        assert!(ratio >= 1.0 - 1e-9);
    }
}

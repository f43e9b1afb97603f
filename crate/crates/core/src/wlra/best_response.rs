//! Closed-form best responses. Each is a batch of independent ridge
//! regressions, one per row of `U` (or column of `V`), optionally compressed
//! by a shared sketch.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WlraError};
use crate::matrix::{axpy, norm_sq, DenseMatrix, WlraProblem};
use crate::ridge::{
    build_preconditioner, containment_interval, richardson_iteration_bound, solve_normal_equations,
    weighted_normal_equations, PsdInverse, RichardsonConfig,
};
use crate::sketch::Sketch;

/// How each per-row ridge system `(G + λI)x = r` is solved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    /// Cholesky on the normal equations.
    #[default]
    Direct,
    /// Richardson with `B = λI`.
    Richardson,
    /// Richardson with the sketched factor preconditioner.
    #[serde(rename = "precond")]
    PreconditionedRichardson,
}

impl std::str::FromStr for Solver {
    type Err = WlraError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Solver::Direct),
            "richardson" => Ok(Solver::Richardson),
            "precond" | "preconditioned" | "preconditionedrichardson" => Ok(Solver::PreconditionedRichardson),
            other => Err(WlraError::param(format!("unknown solver `{other}`"))),
        }
    }
}

/// Relative residual target for the iterative solvers.
const ITERATIVE_TOLERANCE: f64 = 1e-10;
/// Hard cap on iterations per ridge system.
const MAX_ITERATIVE_STEPS: usize = 10_000;

/// Counters collected over one half-step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    /// Systems where the preconditioner or step size had to be adjusted to
    /// restore `ηA ⪯ B ⪯ A`.
    pub containment_adjustments: usize,
    /// Systems where the iterative solver hit its step cap.
    pub unconverged_solves: usize,
}

impl std::ops::AddAssign for StepStats {
    fn add_assign(&mut self, o: StepStats) {
        self.containment_adjustments += o.containment_adjustments;
        self.unconverged_solves += o.unconverged_solves;
    }
}

enum RowSolver {
    Direct,
    Richardson,
    Preconditioned { b: DenseMatrix, eta: f64, condition: f64 },
}

/// Optimal `U` for fixed `V`: row `i` minimizes
/// `‖S′ D_{W_{i,:}} (Vᵀuᵢ − A_{i,:}ᵀ)‖² + λ‖uᵢ‖²`, with `S′ = I` when absent.
pub fn best_response_u(problem: &WlraProblem, v: &DenseMatrix, sketch: Option<&Sketch>) -> Result<DenseMatrix> {
    Ok(best_response_u_with(problem, v, sketch, Solver::Direct)?.0)
}

/// Optimal `V` for fixed `U`: column `j` minimizes
/// `‖S″ D_{W_{:,j}} (U vⱼ − A_{:,j})‖² + λ‖vⱼ‖²`, with `S″ = I` when absent.
pub fn best_response_v(problem: &WlraProblem, u: &DenseMatrix, sketch: Option<&Sketch>) -> Result<DenseMatrix> {
    Ok(best_response_v_with(problem, u, sketch, Solver::Direct)?.0)
}

pub fn best_response_u_with(
    problem: &WlraProblem,
    v: &DenseMatrix,
    sketch: Option<&Sketch>,
    solver: Solver,
) -> Result<(DenseMatrix, StepStats)> {
    let (_, d) = problem.shape();
    if v.cols() != d || v.rows() == 0 {
        return Err(WlraError::shape("best_response_u", v.shape(), problem.shape()));
    }
    check_sketch(sketch, d, "best_response_u")?;
    let design = v.transpose();
    half_step(problem, &design, problem.data(), problem.weights(), sketch, solver)
}

pub fn best_response_v_with(
    problem: &WlraProblem,
    u: &DenseMatrix,
    sketch: Option<&Sketch>,
    solver: Solver,
) -> Result<(DenseMatrix, StepStats)> {
    let (n, _) = problem.shape();
    if u.rows() != n || u.cols() == 0 {
        return Err(WlraError::shape("best_response_v", u.shape(), problem.shape()));
    }
    check_sketch(sketch, n, "best_response_v")?;
    let (vt, stats) = half_step(
        problem,
        u,
        &problem.data().transpose(),
        &problem.weights().transpose(),
        sketch,
        solver,
    )?;
    Ok((vt.transpose(), stats))
}

fn check_sketch(sketch: Option<&Sketch>, cols: usize, op: &'static str) -> Result<()> {
    match sketch {
        Some(s) if s.cols() != cols => Err(WlraError::shape(op, (s.rows(), s.cols()), (cols, 0))),
        _ => Ok(()),
    }
}

/// Solves one ridge system per row of `targets`: row `r` of the result
/// minimizes `‖S D_{weights_r} (design·x − targets_r)‖² + λ‖x‖²`.
fn half_step(
    problem: &WlraProblem,
    design: &DenseMatrix,
    targets: &DenseMatrix,
    weights: &DenseMatrix,
    sketch: Option<&Sketch>,
    solver: Solver,
) -> Result<(DenseMatrix, StepStats)> {
    let k = design.cols();
    let lambda = problem.lambda();
    let row_solver = match solver {
        Solver::Direct => RowSolver::Direct,
        Solver::Richardson | Solver::PreconditionedRichardson if !(lambda > 0.0) => {
            return Err(WlraError::param("iterative solvers need lambda > 0"));
        }
        Solver::Richardson => RowSolver::Richardson,
        Solver::PreconditionedRichardson => preconditioned(problem, design, sketch)?,
    };

    let solved: Vec<(Vec<f64>, StepStats)> = (0..targets.rows())
        .into_par_iter()
        .map(|r| {
            let (gram, rhs) = weighted_normal_equations(design, targets.row(r), Some(weights.row(r)), sketch);
            solve_row(&row_solver, &gram, &rhs, lambda)
        })
        .collect();

    let mut data = Vec::with_capacity(targets.rows() * k);
    let mut stats = StepStats::default();
    for (x, s) in solved {
        data.extend_from_slice(&x);
        stats += s;
    }
    Ok((DenseMatrix::new(targets.rows(), k, data)?, stats))
}

fn preconditioned(problem: &WlraProblem, design: &DenseMatrix, sketch: Option<&Sketch>) -> Result<RowSolver> {
    let w = problem.weights().as_slice();
    let l_w = w.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    let u_w = w.iter().copied().fold(0.0, f64::max);
    if !l_w.is_finite() {
        return Err(WlraError::ZeroMatrix("weights"));
    }
    let identity;
    let s = match sketch {
        Some(s) => s,
        None => {
            identity = Sketch::identity(design.rows());
            &identity
        }
    };
    let pre = build_preconditioner(design, s, l_w, u_w, problem.shape().0)?;
    // Keeps B definite when the sketch has fewer rows than k.
    let mut b = pre.matrix;
    let shift = problem.lambda() / pre.log_factor;
    for i in 0..b.rows() {
        b.set(i, i, b.get(i, i) + shift);
    }
    let condition = crate::ridge::Preconditioner { matrix: b.clone(), eta: pre.eta, log_factor: pre.log_factor }.condition()?;
    Ok(RowSolver::Preconditioned { b, eta: pre.eta, condition })
}

fn solve_row(solver: &RowSolver, gram: &DenseMatrix, rhs: &[f64], lambda: f64) -> (Vec<f64>, StepStats) {
    let mut stats = StepStats::default();
    let k = gram.rows();
    let x = match solver {
        RowSolver::Direct => solve_normal_equations(gram, rhs, lambda),
        RowSolver::Richardson => {
            // B = λI; ηA ⪯ B holds for η = λ/(tr G + λ).
            let trace: f64 = (0..k).map(|i| gram.get(i, i)).sum();
            let eta = lambda / (trace + lambda);
            let (x, converged) = plain_richardson(gram, rhs, lambda, eta);
            if !converged {
                stats.unconverged_solves += 1;
            }
            x
        }
        RowSolver::Preconditioned { b, eta, condition } => {
            let mut a = gram.clone();
            for i in 0..k {
                a.set(i, i, a.get(i, i) + lambda);
            }
            let (lo, hi) = containment_interval(&a, b).expect("A is definite for lambda > 0");
            let scale = hi.max(1.0);
            let eta_eff = eta.min(lo / scale);
            if scale > 1.0 || eta_eff < *eta {
                stats.containment_adjustments += 1;
            }
            let b_inv = PsdInverse::new(&b.scale(scale), "preconditioner").expect("B is definite");
            let tau = ITERATIVE_TOLERANCE * norm_sq(rhs).sqrt();
            if tau == 0.0 {
                return (vec![0.0; k], stats);
            }
            let steps = richardson_iteration_bound(*condition, ITERATIVE_TOLERANCE, eta_eff).min(MAX_ITERATIVE_STEPS);
            let cfg = RichardsonConfig { eta: eta_eff, max_iters: steps.max(1), tau, exact_containment_check: true, probe_seed: 0 };
            let out = crate::ridge::iterate(&a, &b_inv, rhs, &cfg, false);
            if !out.converged {
                stats.unconverged_solves += 1;
            }
            out.x
        }
    };
    (x, stats)
}

fn plain_richardson(gram: &DenseMatrix, rhs: &[f64], lambda: f64, eta: f64) -> (Vec<f64>, bool) {
    let k = rhs.len();
    let tau = ITERATIVE_TOLERANCE * norm_sq(rhs).sqrt();
    let mut x = vec![0.0; k];
    let mut r: Vec<f64> = rhs.iter().map(|v| -v).collect();
    for _ in 0..MAX_ITERATIVE_STEPS {
        if norm_sq(&r).sqrt() <= tau {
            return (x, true);
        }
        axpy(-eta / lambda, &r, &mut x);
        let gx = gram.matvec(&x).expect("square");
        for i in 0..k {
            r[i] = gx[i] + lambda * x[i] - rhs[i];
        }
    }
    let ok = norm_sq(&r).sqrt() <= tau;
    (x, ok)
}

/// `Σᵢ ‖S′ D_{W_{i,:}} (V ᵀuᵢ − A_{i,:}ᵀ)‖² + λ‖U‖_F² + λ‖V‖_F²`, the
/// objective the sketched `U`-step minimizes.
pub fn sketched_objective_u(problem: &WlraProblem, u: &DenseMatrix, v: &DenseMatrix, sketch: &Sketch) -> Result<f64> {
    check_sketch(Some(sketch), problem.shape().1, "sketched_objective_u")?;
    if u.rows() != problem.shape().0 || v.cols() != problem.shape().1 || u.cols() != v.rows() {
        return Err(WlraError::shape("sketched_objective_u", u.shape(), v.shape()));
    }
    let fit = sketched_fit(&v.transpose(), u, problem.data(), problem.weights(), sketch);
    Ok(fit + problem.regularization(u, v))
}

/// Column counterpart of [`sketched_objective_u`] with `S″` on the left.
pub fn sketched_objective_v(problem: &WlraProblem, u: &DenseMatrix, v: &DenseMatrix, sketch: &Sketch) -> Result<f64> {
    check_sketch(Some(sketch), problem.shape().0, "sketched_objective_v")?;
    if u.rows() != problem.shape().0 || v.cols() != problem.shape().1 || u.cols() != v.rows() {
        return Err(WlraError::shape("sketched_objective_v", u.shape(), v.shape()));
    }
    let fit = sketched_fit(
        u,
        &v.transpose(),
        &problem.data().transpose(),
        &problem.weights().transpose(),
        sketch,
    );
    Ok(fit + problem.regularization(u, v))
}

fn sketched_fit(design: &DenseMatrix, coeffs: &DenseMatrix, targets: &DenseMatrix, weights: &DenseMatrix, s: &Sketch) -> f64 {
    let m = design.rows();
    let mut total = 0.0;
    for r in 0..targets.rows() {
        let fitted = design.matvec(coeffs.row(r)).expect("inner dimensions agree");
        let resid: Vec<f64> = fitted.iter().zip(targets.row(r)).map(|(f, t)| f - t).collect();
        let col = DenseMatrix::from_vec_unchecked(m, 1, resid);
        total += s.apply_weighted_unchecked(&col, Some(weights.row(r))).frobenius_norm_sq();
    }
    total
}

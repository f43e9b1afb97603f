//! Alternating minimization and the SVD baseline.

use std::time::Instant;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WlraError};
use crate::matrix::{statistical_dimension, svd, DenseMatrix, Factorization, WlraProblem};
use crate::rng::{derive_seed, stream_rng};
use crate::sketch::{Sketch, SketchSpec};

use super::best_response::{best_response_u_with, best_response_v_with, Solver, StepStats};

/// Rows and columns sampled per iteration for the statistical-dimension estimate.
const SD_SAMPLES: usize = 8;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AmConfig {
    pub iterations: usize,
    /// `(S′, S″)`: `S′` compresses the `U`-step (realized with `d` columns),
    /// `S″` the `V`-step (realized with `n` columns).
    pub sketch: Option<(SketchSpec, SketchSpec)>,
    pub init_seed: u64,
    pub solver: Solver,
    /// Draw fresh sketches every iteration instead of fixing them up front.
    pub resample_sketches: bool,
    /// Estimate the statistical dimension of the scaled factors each iteration.
    pub track_statistical_dimension: bool,
}

impl AmConfig {
    pub fn new(iterations: usize, init_seed: u64) -> Self {
        AmConfig {
            iterations,
            sketch: None,
            init_seed,
            solver: Solver::Direct,
            resample_sketches: false,
            track_statistical_dimension: false,
        }
    }

    pub fn with_sketch(mut self, u_step: SketchSpec, v_step: SketchSpec) -> Self {
        self.sketch = Some((u_step, v_step));
        self
    }

    pub fn with_solver(mut self, solver: Solver) -> Self {
        self.solver = solver;
        self
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    /// True objective at the initialization and after every iteration.
    pub objective_trace: Vec<f64>,
    /// Wall-clock seconds of each iteration (objective evaluation excluded).
    pub iteration_seconds: Vec<f64>,
    /// Initialization, sketch realization and all iterations.
    pub total_seconds: f64,
    /// Per-iteration estimate of the statistical dimension; empty unless tracked.
    pub sd_estimates: Vec<f64>,
    pub final_objective: f64,
    /// `λ(‖U‖² + ‖V‖²)` as a fraction of the final objective.
    pub regularization_share: f64,
    pub stats: StepStats,
}

/// Uniformly random `k` columns of `A` for `U` and `k` rows for `V`,
/// sampled without replacement.
pub fn initialize(problem: &WlraProblem, seed: u64) -> Result<Factorization> {
    let (n, d) = problem.shape();
    let k = problem.k();
    let mut rng = stream_rng(seed, 0);
    let cols = sample(&mut rng, d, k).into_vec();
    let rows = sample(&mut rng, n, k).into_vec();
    Factorization::new(problem.data().select_columns(&cols)?, problem.data().select_rows(&rows)?)
}

pub fn alternating_minimization(problem: &WlraProblem, cfg: &AmConfig) -> Result<(Factorization, SolveReport)> {
    let (n, d) = problem.shape();
    let start = Instant::now();
    let init = initialize(problem, cfg.init_seed)?;
    let (mut u, mut v) = (init.u, init.v);
    let realize = |it: u64| -> Option<(Sketch, Sketch)> {
        cfg.sketch.map(|(s1, s2)| {
            let (s1, s2) = if cfg.resample_sketches {
                (s1.reseeded(derive_seed(s1.seed, it)), s2.reseeded(derive_seed(s2.seed, it)))
            } else {
                (s1, s2)
            };
            (s1.realize(d), s2.realize(n))
        })
    };
    let mut sketches = realize(0);
    let mut total = start.elapsed().as_secs_f64();

    let mut trace = vec![problem.objective(&u, &v)?];
    let mut iteration_seconds = Vec::with_capacity(cfg.iterations);
    let mut sd_estimates = Vec::new();
    let mut stats = StepStats::default();
    for it in 0..cfg.iterations {
        let tick = Instant::now();
        if cfg.resample_sketches && it > 0 {
            sketches = realize(it as u64);
        }
        let (s1, s2) = match &sketches {
            Some((a, b)) => (Some(a), Some(b)),
            None => (None, None),
        };
        let (nu, su) = best_response_u_with(problem, &v, s1, cfg.solver)?;
        u = nu;
        let (nv, sv) = best_response_v_with(problem, &u, s2, cfg.solver)?;
        v = nv;
        let secs = tick.elapsed().as_secs_f64();
        iteration_seconds.push(secs);
        total += secs;
        stats += su;
        stats += sv;
        trace.push(problem.objective(&u, &v)?);
        if cfg.track_statistical_dimension {
            sd_estimates.push(estimate_statistical_dimension(problem, &u, &v, derive_seed(cfg.init_seed, it as u64 + 1))?);
        }
    }

    let f = Factorization::evaluated(problem, u, v)?;
    let final_objective = f.objective.expect("evaluated");
    let reg = problem.regularization(&f.u, &f.v);
    let report = SolveReport {
        objective_trace: trace,
        iteration_seconds,
        total_seconds: total,
        sd_estimates,
        final_objective,
        regularization_share: if final_objective > 0.0 { reg / final_objective } else { 0.0 },
        stats,
    };
    Ok((f, report))
}

/// Max of `sd_λ(V D_{W_{i,:}})` and `sd_λ(D_{W_{:,j}} U)` over a few sampled
/// rows `i` and columns `j`.
pub fn estimate_statistical_dimension(problem: &WlraProblem, u: &DenseMatrix, v: &DenseMatrix, seed: u64) -> Result<f64> {
    let (n, d) = problem.shape();
    let mut rng = stream_rng(seed, 1);
    let mut best: f64 = 0.0;
    for i in sample(&mut rng, n, SD_SAMPLES.min(n)) {
        best = best.max(statistical_dimension(&problem.row_scaled(i, v)?, problem.lambda())?);
    }
    for j in sample(&mut rng, d, SD_SAMPLES.min(d)) {
        best = best.max(statistical_dimension(&problem.col_scaled(j, u)?, problem.lambda())?);
    }
    Ok(best)
}

/// Best rank-`k` approximation in Frobenius norm: `U = U_k Σ_k`, `V = V_kᵀ`.
pub fn svd_baseline(a: &DenseMatrix, k: usize) -> Result<Factorization> {
    let (n, d) = a.shape();
    if k == 0 || k > n.min(d) {
        return Err(WlraError::param(format!("k = {k} must satisfy 1 <= k <= min(n, d) = {}", n.min(d))));
    }
    let dec = svd(a);
    let idx: Vec<usize> = (0..k).collect();
    let u = dec.u.select_columns(&idx)?.scale_columns(&dec.singular_values[..k])?;
    let v = dec.v_t.select_rows(&idx)?;
    Factorization::new(u, v)
}

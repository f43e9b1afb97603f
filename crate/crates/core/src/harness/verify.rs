//! Monte Carlo verification suites with machine-readable outcomes.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WlraError};
use crate::matrix::{
    objective_column_form, objective_row_form, singular_values, stable_rank,
    statistical_dimension_from_singular_values, DenseMatrix, WlraProblem,
};
use crate::ridge::{
    batch_objective_ratio, build_preconditioner, richardson_iteration_bound, richardson_polynomial,
    evaluate_richardson_polynomial, richardson_solve, PsdInverse, RichardsonConfig, RidgeProblem,
};
use crate::rng::{derive_seed, stream_rng};
use crate::sketch::{
    amm_bound, amm_error, gamma_alpha_diagnostics, recommended_sketch_size, recommended_sketch_size_with,
    SketchKind, SketchSpec,
};
use crate::wlra::{
    alternating_minimization, best_response_v, rank_reduce_projection, round_weight_factors, AmConfig,
};

use super::datasets::{gen_low_rank_weights, gen_synthetic, random_orthonormal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifySuite {
    SketchedRidge,
    AmmTail,
    Rounding,
    Richardson,
    RankReduce,
    ObjectiveForms,
    Sketch,
}

impl VerifySuite {
    pub const ALL: [VerifySuite; 7] = [
        VerifySuite::SketchedRidge,
        VerifySuite::AmmTail,
        VerifySuite::Rounding,
        VerifySuite::Richardson,
        VerifySuite::RankReduce,
        VerifySuite::ObjectiveForms,
        VerifySuite::Sketch,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            VerifySuite::SketchedRidge => "theorem31",
            VerifySuite::AmmTail => "lemma25",
            VerifySuite::Rounding => "rounding",
            VerifySuite::Richardson => "richardson",
            VerifySuite::RankReduce => "rank_reduce",
            VerifySuite::ObjectiveForms => "objective_forms",
            VerifySuite::Sketch => "sketch",
        }
    }
}

impl std::str::FromStr for VerifySuite {
    type Err = WlraError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        VerifySuite::ALL
            .into_iter()
            .find(|v| v.name() == key || v.name().replace('_', "") == key)
            .ok_or_else(|| WlraError::UnknownSuite(s.to_string()))
    }
}

/// Optional overrides; each suite falls back to its own defaults.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct VerifyParams {
    pub seed: u64,
    pub trials: Option<usize>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub k: Option<usize>,
    pub lambda: Option<f64>,
    pub epsilon: Option<f64>,
    pub sd_target: Option<f64>,
    pub ell: Option<usize>,
    pub kind: Option<SketchKind>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub suite: VerifySuite,
    pub passed: bool,
    pub statistics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

pub fn verify_suite(which: VerifySuite, params: &VerifyParams) -> Result<VerifyOutcome> {
    let mut stats = BTreeMap::new();
    let mut notes = Vec::new();
    let passed = match which {
        VerifySuite::SketchedRidge => {
            let mut cfg = SketchedRidgeConfig::standard(params.seed);
            let e = &mut cfg.ensemble;
            e.problems = params.d.unwrap_or(e.problems);
            e.n = params.n.unwrap_or(e.n);
            e.k = params.k.unwrap_or(e.k);
            e.sd_target = params.sd_target.unwrap_or(e.sd_target);
            e.lambda = params.lambda;
            cfg.epsilon = params.epsilon.unwrap_or(cfg.epsilon);
            cfg.trials = params.trials.unwrap_or(cfg.trials);
            cfg.ell = params.ell;
            cfg.kind = params.kind.unwrap_or(cfg.kind);
            let r = sketched_ridge_experiment(&cfg)?;
            stats.insert("ell".into(), r.ell as f64);
            stats.insert("lambda".into(), r.lambda);
            stats.insert("max_sd".into(), r.max_sd);
            stats.insert("median_ratio".into(), r.median_ratio);
            stats.insert("pass_fraction".into(), r.pass_fraction);
            stats.insert("median_gamma".into(), r.median_gamma);
            stats.insert("median_alpha".into(), r.median_alpha);
            notes.push(format!(
                "pass iff median ratio <= {} and at least 60% of seeds <= {}",
                1.0 + cfg.epsilon,
                1.0 + 2.0 * cfg.epsilon
            ));
            r.passed
        }
        VerifySuite::AmmTail => {
            let mut cfg = AmmTailConfig::standard(params.seed);
            cfg.trials = params.trials.unwrap_or(cfg.trials);
            cfg.n = params.n.unwrap_or(cfg.n);
            cfg.cols = params.d.unwrap_or(cfg.cols);
            cfg.kind = params.kind.unwrap_or(cfg.kind);
            let r = amm_tail_experiment(&cfg)?;
            stats.insert("ell".into(), r.ell as f64);
            stats.insert("K".into(), r.k);
            stats.insert("failure_frequency".into(), r.frequency);
            stats.insert("nominal".into(), cfg.failure);
            notes.push(format!("constants gamma = {}, c = {}", cfg.gamma, cfg.c));
            r.passed
        }
        VerifySuite::Rounding => {
            let mut cfg = RoundingConfig::standard(params.seed);
            cfg.instances = params.trials.unwrap_or(cfg.instances);
            if let Some(eps) = params.epsilon {
                cfg.epsilons = vec![eps];
            }
            let r = rounding_experiment(&cfg)?;
            stats.insert("instances".into(), r.instances as f64);
            stats.insert("violations".into(), r.violations as f64);
            stats.insert("max_upper_ratio".into(), r.max_upper_ratio);
            stats.insert("min_lower_ratio".into(), r.min_lower_ratio);
            r.violations == 0
        }
        VerifySuite::Richardson => {
            let mut cfg = RichardsonExperiment::standard(params.seed);
            cfg.pairs = params.trials.unwrap_or(cfg.pairs);
            let r = richardson_experiment(&cfg)?;
            stats.insert("max_relative_error".into(), r.max_relative_error);
            stats.insert("max_iterations".into(), r.max_iterations as f64);
            stats.insert("one_step_error".into(), r.one_step_error);
            stats.insert("polynomial_gap".into(), r.polynomial_gap);
            let p = preconditioner_experiment(&PreconditionerExperiment::standard(params.seed))?;
            stats.insert("preconditioner_relative_error".into(), p.relative_error);
            stats.insert("preconditioner_iterations".into(), p.iterations as f64);
            stats.insert("preconditioner_bound".into(), p.bound as f64);
            stats.insert("preconditioner_eta".into(), p.eta);
            r.passed && p.passed
        }
        VerifySuite::RankReduce => {
            let mut cfg = RankReduceConfig::standard(params.seed);
            cfg.n = params.n.unwrap_or(cfg.n);
            cfg.d = params.d.unwrap_or(cfg.d);
            cfg.k = params.k.unwrap_or(cfg.k);
            cfg.epsilon = params.epsilon.unwrap_or(cfg.epsilon);
            cfg.ell = params.ell;
            let r = rank_reduce_experiment(&cfg)?;
            stats.insert("ell".into(), r.ell as f64);
            stats.insert("reduced_rank".into(), r.reduced_rank as f64);
            stats.insert("opt_proxy".into(), r.opt_proxy);
            stats.insert("projected_objective".into(), r.projected_objective);
            stats.insert("ratio".into(), r.ratio);
            stats.insert("reduced_opt_proxy".into(), r.reduced_opt_proxy);
            stats.insert("reduced_ratio".into(), r.reduced_ratio);
            stats.insert("idempotence_error".into(), r.idempotence_error);
            if r.projection_is_identity {
                notes.push("r * ell >= n, so P is the identity and the projected objective equals the proxy".into());
            }
            notes.push("OPT is approximated by the best of 5 long unsketched alternating minimization runs".into());
            r.passed
        }
        VerifySuite::ObjectiveForms => {
            let r = objective_forms_experiment(params.trials.unwrap_or(50), params.seed)?;
            stats.insert("max_relative_gap".into(), r);
            r <= 1e-9
        }
        VerifySuite::Sketch => {
            let kind = params.kind.unwrap_or(SketchKind::Gaussian);
            let rows = params.ell.unwrap_or(50);
            let r = sketch_experiment(kind, rows, params.trials.unwrap_or(1000), params.seed)?;
            stats.insert("mean_norm_ratio".into(), r.mean_norm_ratio);
            stats.insert("norm_ratio_tolerance".into(), r.tolerance);
            stats.insert("tail_frequency_025".into(), r.tail_frequency);
            stats.insert("structure_ok".into(), if r.structure_ok { 1.0 } else { 0.0 });
            notes.push("tail_frequency_025 is the fraction of trials with |‖Sx‖²/‖x‖² − 1| > 0.25".into());
            r.passed
        }
    };
    Ok(VerifyOutcome { suite: which, passed, statistics: stats, notes })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.is_empty() {
        f64::NAN
    } else if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn gaussian_matrix(rows: usize, cols: usize, seed: u64, stream: u64) -> DenseMatrix {
    let mut rng = stream_rng(seed, stream);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal)).expect("finite")
}

// ---------------------------------------------------------------------------
// Sketched multiple ridge regression

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RidgeEnsembleConfig {
    pub problems: usize,
    pub n: usize,
    pub k: usize,
    /// Target for `max_i sd_λ(M_i)`; used to tune `λ` when `lambda` is unset.
    pub sd_target: f64,
    pub lambda: Option<f64>,
    /// Column `j` of each design is scaled by `decay^j`.
    pub decay: f64,
    pub noise: f64,
    pub seed: u64,
}

impl RidgeEnsembleConfig {
    pub fn standard(seed: u64) -> Self {
        RidgeEnsembleConfig { problems: 30, n: 200, k: 10, sd_target: 3.0, lambda: None, decay: 0.5, noise: 0.1, seed }
    }
}

#[derive(Clone, Debug)]
pub struct RidgeEnsemble {
    pub problems: Vec<RidgeProblem>,
    pub lambda: f64,
    pub max_sd: f64,
}

/// Designs `M_i = G_i · diag(decay^j)` with Gaussian `G_i`, targets
/// `b_i = M_i x*_i + noise·g_i`, and one `λ` for the whole batch.
pub fn ridge_ensemble(cfg: &RidgeEnsembleConfig) -> Result<RidgeEnsemble> {
    if cfg.problems == 0 || cfg.n == 0 || cfg.k == 0 {
        return Err(WlraError::param("ensemble dimensions must be positive"));
    }
    let scales: Vec<f64> = (0..cfg.k).map(|j| cfg.decay.powi(j as i32)).collect();
    let mut designs = Vec::with_capacity(cfg.problems);
    let mut targets = Vec::with_capacity(cfg.problems);
    for i in 0..cfg.problems {
        let seed = derive_seed(cfg.seed, i as u64);
        let m = gaussian_matrix(cfg.n, cfg.k, seed, 0).scale_columns(&scales)?;
        let mut rng = stream_rng(seed, 1);
        let x: Vec<f64> = (0..cfg.k).map(|_| rng.sample(StandardNormal)).collect();
        let mut b = m.matvec(&x)?;
        for v in b.iter_mut() {
            *v += cfg.noise * rng.sample::<f64, _>(StandardNormal);
        }
        designs.push(m);
        targets.push(b);
    }
    let spectra: Vec<Vec<f64>> = designs.iter().map(singular_values).collect();
    let max_sd = |lambda: f64| {
        spectra
            .iter()
            .map(|s| statistical_dimension_from_singular_values(s, lambda, cfg.n))
            .fold(0.0, f64::max)
    };
    let lambda = match cfg.lambda {
        Some(l) => l,
        None => {
            if !(cfg.sd_target > 0.0) || cfg.sd_target >= cfg.k as f64 {
                return Err(WlraError::param(format!("sd target {} must lie in (0, k)", cfg.sd_target)));
            }
            // sd_λ decreases in λ; bisect on ln λ.
            let (mut lo, mut hi) = (-40.0f64, 40.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if max_sd(mid.exp()) > cfg.sd_target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi.exp()
        }
    };
    let problems = designs
        .into_iter()
        .zip(targets)
        .map(|(m, b)| RidgeProblem::new(m, b, lambda))
        .collect::<Result<Vec<_>>>()?;
    Ok(RidgeEnsemble { problems, lambda, max_sd: max_sd(lambda) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SketchedRidgeConfig {
    pub ensemble: RidgeEnsembleConfig,
    pub epsilon: f64,
    /// Sketch rows; `recommended_sketch_size(sd_target, ε)` when unset.
    pub ell: Option<usize>,
    pub kind: SketchKind,
    pub trials: usize,
    pub seed: u64,
}

impl SketchedRidgeConfig {
    pub fn standard(seed: u64) -> Self {
        SketchedRidgeConfig {
            ensemble: RidgeEnsembleConfig::standard(seed),
            epsilon: 0.5,
            ell: None,
            kind: SketchKind::Gaussian,
            trials: 50,
            seed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SketchedRidgeResult {
    pub ell: usize,
    pub lambda: f64,
    pub max_sd: f64,
    pub ratios: Vec<f64>,
    pub median_ratio: f64,
    /// Fraction of seeds with ratio `≤ 1 + 2ε`.
    pub pass_fraction: f64,
    pub median_gamma: f64,
    pub median_alpha: f64,
    pub passed: bool,
}

pub fn sketched_ridge_experiment(cfg: &SketchedRidgeConfig) -> Result<SketchedRidgeResult> {
    if cfg.trials == 0 {
        return Err(WlraError::param("trials must be positive"));
    }
    let ens = ridge_ensemble(&cfg.ensemble)?;
    let ell = match cfg.ell {
        Some(l) => l,
        None => recommended_sketch_size(cfg.ensemble.sd_target, cfg.epsilon)?,
    };
    let n = cfg.ensemble.n;
    let first = &ens.problems[0];
    let mut ratios = Vec::with_capacity(cfg.trials);
    let mut gammas = Vec::with_capacity(cfg.trials);
    let mut alphas = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let s = SketchSpec::new(cfg.kind, ell, derive_seed(cfg.seed, 1000 + t as u64))?.realize(n);
        ratios.push(batch_objective_ratio(&ens.problems, &s)?);
        let diag = gamma_alpha_diagnostics(&s, first.design(), first.target(), ens.lambda)?;
        gammas.push(diag.gamma);
        alphas.push(diag.alpha);
    }
    let median_ratio = median(&ratios);
    let pass_fraction = ratios.iter().filter(|&&r| r <= 1.0 + 2.0 * cfg.epsilon).count() as f64 / ratios.len() as f64;
    Ok(SketchedRidgeResult {
        ell,
        lambda: ens.lambda,
        max_sd: ens.max_sd,
        median_ratio,
        pass_fraction,
        median_gamma: median(&gammas),
        median_alpha: median(&alphas),
        passed: median_ratio <= 1.0 + cfg.epsilon && pass_fraction >= 0.6,
        ratios,
    })
}

/// Median batch ratio for each sketch constant `c`, with the smallest passing one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Calibration {
    pub constants: Vec<f64>,
    pub ells: Vec<usize>,
    pub median_ratios: Vec<f64>,
    pub passed: Vec<bool>,
    pub smallest_passing: Option<f64>,
}

pub fn calibrate_sketch_constant(base: &SketchedRidgeConfig, constants: &[f64]) -> Result<Calibration> {
    let mut out = Calibration {
        constants: constants.to_vec(),
        ells: Vec::new(),
        median_ratios: Vec::new(),
        passed: Vec::new(),
        smallest_passing: None,
    };
    for &c in constants {
        let ell = recommended_sketch_size_with(base.ensemble.sd_target, base.epsilon, c)?;
        let r = sketched_ridge_experiment(&SketchedRidgeConfig { ell: Some(ell), ..base.clone() })?;
        out.ells.push(ell);
        out.median_ratios.push(r.median_ratio);
        out.passed.push(r.passed);
        if r.passed && out.smallest_passing.is_none_or(|best| c < best) {
            out.smallest_passing = Some(c);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Approximate matrix multiplication tail

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AmmTailConfig {
    pub n: usize,
    pub cols: usize,
    pub failure: f64,
    pub gamma: f64,
    pub c: f64,
    pub trials: usize,
    pub kind: SketchKind,
    pub seed: u64,
}

impl AmmTailConfig {
    /// `γ = 0.5`, `c = 1`, `ε̂ = 0.1`, 500 trials on `100 × 20` factors.
    pub fn standard(seed: u64) -> Self {
        AmmTailConfig { n: 100, cols: 20, failure: 0.1, gamma: 0.5, c: 1.0, trials: 500, kind: SketchKind::Gaussian, seed }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AmmTailResult {
    pub ell: usize,
    /// `K = sr(A) + sr(B)`.
    pub k: f64,
    pub failures: usize,
    pub frequency: f64,
    pub passed: bool,
}

/// Fixed factors with geometrically decaying column scales; a fresh sketch
/// of `ℓ = ⌈c(K + ln(1/ε̂))/γ²⌉` rows per trial.
pub fn amm_tail_experiment(cfg: &AmmTailConfig) -> Result<AmmTailResult> {
    let scales: Vec<f64> = (0..cfg.cols).map(|j| 0.8f64.powi(j as i32)).collect();
    let a = gaussian_matrix(cfg.n, cfg.cols, cfg.seed, 0).scale_columns(&scales)?;
    let b = gaussian_matrix(cfg.n, cfg.cols, cfg.seed, 1).scale_columns(&scales)?;
    let k = stable_rank(&a)? + stable_rank(&b)?;
    let ell = crate::sketch::amm_sketch_size(k, cfg.failure, cfg.gamma, cfg.c)?;
    let threshold = amm_bound(&a, &b, k, cfg.gamma);
    let mut failures = 0;
    for t in 0..cfg.trials {
        let s = SketchSpec::new(cfg.kind, ell, derive_seed(cfg.seed, 10 + t as u64))?.realize(cfg.n);
        if amm_error(&s, &a, &b)? > threshold {
            failures += 1;
        }
    }
    let frequency = failures as f64 / cfg.trials as f64;
    Ok(AmmTailResult { ell, k, failures, frequency, passed: frequency <= 2.0 * cfg.failure })
}

// ---------------------------------------------------------------------------
// Rounding sandwich

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundingConfig {
    pub epsilons: Vec<f64>,
    /// Instances per `ε`.
    pub instances: usize,
    pub seed: u64,
}

impl RoundingConfig {
    pub fn standard(seed: u64) -> Self {
        RoundingConfig { epsilons: vec![0.05, 0.1, 0.3], instances: 100, seed }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundingResult {
    pub instances: usize,
    /// Entries outside `[(1−ε)²W, (1+ε)²W]`, counted by brute force.
    pub violations: usize,
    /// Largest `(W′/W)/(1+ε)²`; at most 1 inside the sandwich.
    pub max_upper_ratio: f64,
    /// Smallest `(W′/W)/(1−ε)²`; at least 1 inside the sandwich.
    pub min_lower_ratio: f64,
}

/// Random nonnegative `Y`, `Z` with log-normal entries and some zeros.
pub fn random_nonnegative_factors(seed: u64) -> (DenseMatrix, DenseMatrix) {
    let mut rng = stream_rng(seed, 0);
    let n = rng.random_range(2..40);
    let r = rng.random_range(1..5);
    let d = rng.random_range(2..30);
    let mut entry = move |_: usize, _: usize| {
        if rng.random::<f64>() < 0.2 {
            0.0
        } else {
            (2.0 * rng.sample::<f64, _>(StandardNormal)).exp()
        }
    };
    let y = DenseMatrix::from_fn(n, r, &mut entry).expect("finite");
    let z = DenseMatrix::from_fn(r, d, &mut entry).expect("finite");
    (y, z)
}

pub fn rounding_experiment(cfg: &RoundingConfig) -> Result<RoundingResult> {
    let mut out = RoundingResult { instances: 0, violations: 0, max_upper_ratio: 0.0, min_lower_ratio: f64::INFINITY };
    for (e, &eps) in cfg.epsilons.iter().enumerate() {
        for t in 0..cfg.instances {
            let (y, z) = random_nonnegative_factors(derive_seed(cfg.seed, (e * cfg.instances + t) as u64));
            out.instances += 1;
            let rounded = match round_weight_factors(&y, &z, eps) {
                Ok(r) => r,
                Err(_) => {
                    out.violations += 1;
                    continue;
                }
            };
            // Brute-force triple loop, independent of the matrix product.
            let (lo, hi) = ((1.0 - eps).powi(2), (1.0 + eps).powi(2));
            for i in 0..y.rows() {
                for j in 0..z.cols() {
                    let (mut w, mut wp) = (0.0, 0.0);
                    for t in 0..y.cols() {
                        w += y.get(i, t) * z.get(t, j);
                        wp += rounded.y.get(i, t) * rounded.z.get(t, j);
                    }
                    if !(lo * w <= wp && wp <= hi * w) {
                        out.violations += 1;
                    }
                    if w > 0.0 {
                        out.max_upper_ratio = out.max_upper_ratio.max(wp / w / hi);
                        out.min_lower_ratio = out.min_lower_ratio.min(wp / w / lo);
                    }
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Richardson iteration

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RichardsonExperiment {
    pub etas: Vec<f64>,
    /// Pairs per `η`.
    pub pairs: usize,
    pub target: f64,
    pub seed: u64,
}

impl RichardsonExperiment {
    pub fn standard(seed: u64) -> Self {
        RichardsonExperiment { etas: vec![0.1, 0.5, 1.0], pairs: 50, target: 1e-6, seed }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RichardsonResult {
    pub max_relative_error: f64,
    pub max_iterations: usize,
    /// Relative error after one step with `B = A`, `η = 1`.
    pub one_step_error: f64,
    /// Largest gap between iterates and the polynomial form.
    pub polynomial_gap: f64,
    pub passed: bool,
}

/// `A = Q diag(a) Qᵀ` with log-uniform spectrum in `[10⁻², 10²]` and
/// `B = A^{1/2} C A^{1/2}` with `spec(C) ⊂ [η, 1]`, so `ηA ⪯ B ⪯ A`.
pub fn random_containment_pair(dim: usize, eta: f64, seed: u64) -> Result<(DenseMatrix, DenseMatrix)> {
    let mut rng = stream_rng(seed, 0);
    let q = random_orthonormal(dim, dim, seed, 1)?;
    let p = random_orthonormal(dim, dim, seed, 2)?;
    let a_eig: Vec<f64> = (0..dim).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
    let c_eig: Vec<f64> = (0..dim).map(|_| if eta >= 1.0 { 1.0 } else { rng.random_range(eta..=1.0) }).collect();
    let sqrt_a = q.scale_columns(&a_eig.iter().map(|v| v.sqrt()).collect::<Vec<_>>())?.matmul(&q.transpose())?;
    let a = q.scale_columns(&a_eig)?.matmul(&q.transpose())?;
    let c = p.scale_columns(&c_eig)?.matmul(&p.transpose())?;
    let b = sqrt_a.matmul(&c)?.matmul(&sqrt_a)?;
    let sym = |m: &DenseMatrix| m.add(&m.transpose()).map(|s| s.scale(0.5));
    Ok((sym(&a)?, sym(&b)?))
}

fn relative_error(x: &[f64], truth: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn condition_number(m: &DenseMatrix) -> f64 {
    let s = singular_values(m);
    s[0] / s[s.len() - 1]
}

pub fn richardson_experiment(cfg: &RichardsonExperiment) -> Result<RichardsonResult> {
    let mut out = RichardsonResult { max_relative_error: 0.0, max_iterations: 0, one_step_error: 0.0, polynomial_gap: 0.0, passed: true };
    for (e, &eta) in cfg.etas.iter().enumerate() {
        for t in 0..cfg.pairs {
            let seed = derive_seed(cfg.seed, (e * cfg.pairs + t) as u64);
            let mut rng = stream_rng(seed, 9);
            let dim = rng.random_range(4..16);
            let (a, b) = random_containment_pair(dim, eta, seed)?;
            let rhs: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let truth = PsdInverse::new(&a, "A")?.solve(&rhs);
            let bound = richardson_iteration_bound(condition_number(&b), cfg.target, eta);
            let rc = RichardsonConfig { eta, max_iters: bound, tau: 1e-300, exact_containment_check: true, probe_seed: seed };
            let res = richardson_solve(&a, &b, &rhs, &rc)?;
            let err = relative_error(&res.x, &truth);
            out.max_relative_error = out.max_relative_error.max(err);
            out.max_iterations = out.max_iterations.max(res.iterations);
            out.passed &= err <= cfg.target && !res.containment_violated;
            if t == 0 {
                let steps = bound.min(12);
                let short = RichardsonConfig { max_iters: steps, ..rc };
                let iterate = richardson_solve(&a, &b, &rhs, &short)?;
                let poly = evaluate_richardson_polynomial(&a, &b, &rhs, &richardson_polynomial(eta, steps))?;
                out.polynomial_gap = out.polynomial_gap.max(relative_error(&poly, &iterate.x));
            }
        }
    }
    let (a, _) = random_containment_pair(8, 1.0, derive_seed(cfg.seed, u64::MAX))?;
    let rhs: Vec<f64> = (0..8).map(|i| (i as f64).sin() + 0.5).collect();
    let one = richardson_solve(&a, &a, &rhs, &RichardsonConfig::new(1.0, 1, 1e-300)?)?;
    out.one_step_error = relative_error(&one.x, &PsdInverse::new(&a, "A")?.solve(&rhs));
    out.passed &= out.one_step_error <= 1e-9 && out.polynomial_gap <= 1e-8;
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PreconditionerExperiment {
    pub n: usize,
    pub k: usize,
    pub weight_ratio: f64,
    pub target: f64,
    pub kind: SketchKind,
    pub seed: u64,
}

impl PreconditionerExperiment {
    pub fn standard(seed: u64) -> Self {
        PreconditionerExperiment { n: 200, k: 20, weight_ratio: 10.0, target: 1e-6, kind: SketchKind::Gaussian, seed }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PreconditionerResult {
    pub ell: usize,
    pub eta: f64,
    pub bound: usize,
    pub iterations: usize,
    pub relative_error: f64,
    pub containment_violated: bool,
    pub passed: bool,
}

/// Solves `Fᵀ D_w² F x = r` for a Gaussian `n × k` factor `F` and weights in
/// `[1, weight_ratio]`, preconditioned by the sketched factor Gram.
pub fn preconditioner_experiment(cfg: &PreconditionerExperiment) -> Result<PreconditionerResult> {
    let f = gaussian_matrix(cfg.n, cfg.k, cfg.seed, 0);
    let mut rng = stream_rng(cfg.seed, 1);
    let (l_w, u_w) = (1.0, cfg.weight_ratio);
    let mut w: Vec<f64> = (0..cfg.n).map(|_| rng.random_range(l_w..=u_w)).collect();
    w[0] = l_w;
    w[1] = u_w;
    let weighted = f.scale_rows(&w)?;
    let a = weighted.gram();
    let rhs: Vec<f64> = (0..cfg.k).map(|_| rng.sample(StandardNormal)).collect();
    let truth = PsdInverse::new(&a, "A")?.solve(&rhs);

    let ell = recommended_sketch_size(cfg.k as f64, 0.5)?.min(cfg.n);
    let s = SketchSpec::new(cfg.kind, ell, derive_seed(cfg.seed, 2))?.realize(cfg.n);
    let pre = build_preconditioner(&f, &s, l_w, u_w, cfg.n)?;
    let bound = pre.iteration_bound(cfg.target)?;
    let rc = RichardsonConfig { eta: pre.eta, max_iters: bound, tau: 1e-300, exact_containment_check: true, probe_seed: cfg.seed };
    let res = richardson_solve(&a, &pre.matrix, &rhs, &rc)?;
    let relative_error = relative_error(&res.x, &truth);
    Ok(PreconditionerResult {
        ell,
        eta: pre.eta,
        bound,
        iterations: res.iterations,
        relative_error,
        containment_violated: res.containment_violated,
        passed: relative_error <= cfg.target,
    })
}

// ---------------------------------------------------------------------------
// Rank reduction

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankReduceConfig {
    pub n: usize,
    pub d: usize,
    pub r: usize,
    pub k: usize,
    pub sd_target: f64,
    pub lambda: f64,
    pub epsilon: f64,
    /// Rows of `S″`; `recommended_sketch_size(sd_target, ε)` when unset.
    pub ell: Option<usize>,
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl RankReduceConfig {
    pub fn standard(seed: u64) -> Self {
        RankReduceConfig {
            n: 40,
            d: 20,
            r: 2,
            k: 15,
            sd_target: 2.0,
            lambda: 1.0,
            epsilon: 0.5,
            ell: None,
            iterations: 100,
            restarts: 5,
            seed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankReduceResult {
    pub ell: usize,
    pub reduced_rank: usize,
    pub opt_proxy: f64,
    pub projected_objective: f64,
    pub ratio: f64,
    /// Best unsketched run at rank `min(k′, d)`, the same proxy for `OPT(k′)`.
    pub reduced_opt_proxy: f64,
    /// `reduced_opt_proxy / opt_proxy`.
    pub reduced_ratio: f64,
    /// `P = I`, which happens once `r·ℓ ≥ n`; the projected check is then vacuous.
    pub projection_is_identity: bool,
    pub idempotence_error: f64,
    pub symmetry_error: f64,
    pub passed: bool,
}

fn best_am_objective(problem: &WlraProblem, cfg: &RankReduceConfig) -> Result<(f64, DenseMatrix)> {
    let mut best: Option<(f64, DenseMatrix)> = None;
    for r in 0..cfg.restarts {
        let am = AmConfig::new(cfg.iterations, derive_seed(cfg.seed, 100 + r as u64));
        let (f, report) = alternating_minimization(problem, &am)?;
        if best.as_ref().is_none_or(|(o, _)| report.final_objective < *o) {
            best = Some((report.final_objective, f.u));
        }
    }
    best.ok_or_else(|| WlraError::param("restarts must be positive"))
}

pub fn rank_reduce_experiment(cfg: &RankReduceConfig) -> Result<RankReduceResult> {
    let a = gen_synthetic(cfg.n, cfg.d, cfg.sd_target, cfg.lambda, derive_seed(cfg.seed, 1))?;
    let w = gen_low_rank_weights(cfg.n, cfg.d, cfg.r, derive_seed(cfg.seed, 2))?;
    let problem = WlraProblem::new(a, w.clone(), cfg.k, cfg.lambda, cfg.epsilon)?;

    // OPT proxy: best of several long unsketched runs.
    let (_, u_star) = best_am_objective(&problem, cfg)?;
    let v_star = best_response_v(&problem, &u_star, None)?;
    let opt_proxy = problem.objective(&u_star, &v_star)?;

    let ell = match cfg.ell {
        Some(l) => l,
        None => recommended_sketch_size(cfg.sd_target, cfg.epsilon)?,
    };
    let spp = crate::sketch::sample_sketch(&SketchSpec::gaussian(ell, derive_seed(cfg.seed, 3))?, cfg.n)?;
    let red = rank_reduce_projection(problem.weights(), &spp)?;
    let p = &red.projection;
    let pu = p.matmul(&u_star)?;
    let pv = best_response_v(&problem, &pu, None)?;
    let projected_objective = problem.objective(&pu, &pv)?;
    let ratio = projected_objective / opt_proxy;
    let idempotence_error = p.matmul(p)?.max_abs_diff(p)?;
    let symmetry_error = p.max_abs_diff(&p.transpose())?;
    let projection_is_identity = p.max_abs_diff(&DenseMatrix::identity(cfg.n))? <= 1e-9;
    let (reduced_opt_proxy, _) = best_am_objective(&problem.with_rank(red.rank.clamp(1, problem.shape().1))?, cfg)?;
    Ok(RankReduceResult {
        ell,
        reduced_rank: red.rank,
        opt_proxy,
        projected_objective,
        ratio,
        reduced_opt_proxy,
        reduced_ratio: reduced_opt_proxy / opt_proxy,
        projection_is_identity,
        idempotence_error,
        symmetry_error,
        passed: ratio <= 1.0 + cfg.epsilon && idempotence_error <= 1e-9 && red.rank <= red.weight_rank * ell,
    })
}

// ---------------------------------------------------------------------------
// Objective forms and sketch sanity

/// Largest relative disagreement between the direct, row and column forms.
pub fn objective_forms_experiment(trials: usize, seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let s = derive_seed(seed, t as u64);
        let mut rng = stream_rng(s, 0);
        let n = rng.random_range(2..20);
        let d = rng.random_range(1..=n);
        let k = rng.random_range(1..=d);
        let lambda = rng.random_range(0.0..2.0);
        let a = gaussian_matrix(n, d, s, 1);
        let w = gaussian_matrix(n, d, s, 2).map(f64::abs)?;
        let p = WlraProblem::new(a, w, k, lambda, 0.5)?;
        let u = gaussian_matrix(n, k, s, 3);
        let v = gaussian_matrix(k, d, s, 4);
        let direct = p.objective(&u, &v)?;
        let rows = objective_row_form(&p, &u, &v)?;
        let cols = objective_column_form(&p, &u, &v)?;
        let scale = direct.abs().max(f64::MIN_POSITIVE);
        worst = worst.max((rows - direct).abs() / scale).max((cols - direct).abs() / scale);
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SketchCheck {
    pub mean_norm_ratio: f64,
    pub tolerance: f64,
    pub tail_frequency: f64,
    pub structure_ok: bool,
    pub passed: bool,
}

/// Unbiasedness of `‖Sx‖²` over fresh sketches plus the structural property
/// of the kind (one signed unit per CountSketch column).
pub fn sketch_experiment(kind: SketchKind, rows: usize, trials: usize, seed: u64) -> Result<SketchCheck> {
    if trials == 0 {
        return Err(WlraError::param("trials must be positive"));
    }
    let n = 64;
    let mut rng = stream_rng(seed, 0);
    let mut x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    let mut ratios = Vec::with_capacity(trials);
    let mut structure_ok = true;
    for t in 0..trials {
        let spec = SketchSpec::new(kind, rows, derive_seed(seed, t as u64))?;
        let s = spec.realize(n);
        let sx = s.apply_vec(&x)?;
        ratios.push(sx.iter().map(|v| v * v).sum::<f64>());
        if kind == SketchKind::CountSketch && t < 20 {
            let dense = s.to_dense();
            structure_ok &= (0..n).all(|j| {
                let col = dense.column(j);
                col.iter().filter(|v| **v != 0.0).count() == 1 && col.iter().all(|v| *v == 0.0 || v.abs() == 1.0)
            });
        }
    }
    let mean = ratios.iter().sum::<f64>() / trials as f64;
    // Var ‖Sx‖² ≤ 2/ℓ for both kinds with unit x.
    let tolerance = 4.0 * (2.0 / (rows as f64 * trials as f64)).sqrt();
    let tail_frequency = ratios.iter().filter(|r| (*r - 1.0).abs() > 0.25).count() as f64 / trials as f64;
    Ok(SketchCheck {
        mean_norm_ratio: mean,
        tolerance,
        tail_frequency,
        structure_ok,
        passed: structure_ok && (mean - 1.0).abs() <= tolerance,
    })
}

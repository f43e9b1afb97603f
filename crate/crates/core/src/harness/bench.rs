//! Sweeps over sketch sizes comparing the SVD baseline, unsketched
//! alternating minimization and sketched alternating minimization.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WlraError};
use crate::matrix::{DenseMatrix, Factorization, WlraProblem};
use crate::rng::derive_seed;
use crate::sketch::{SketchKind, SketchSpec};
use crate::wlra::{alternating_minimization, svd_baseline, AmConfig, Solver};

use super::datasets::{gen_synthetic, gen_weights, WeightProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Svd,
    Am,
    AmSketched,
}

impl std::str::FromStr for Algorithm {
    type Err = WlraError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "svd" => Ok(Algorithm::Svd),
            "am" => Ok(Algorithm::Am),
            "am_sketched" | "sketched" => Ok(Algorithm::AmSketched),
            other => Err(WlraError::param(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n: usize,
    pub d: usize,
    pub sd_target: f64,
    pub weights: WeightProfile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchConfig {
    pub dataset: DatasetSpec,
    pub k: usize,
    pub lambda: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub sketch_sizes: Vec<usize>,
    pub sketch_kind: SketchKind,
    pub algorithms: Vec<Algorithm>,
    pub solver: Solver,
    pub seed: u64,
    /// Timed repetitions per cell; the median is reported.
    pub repetitions: usize,
    /// Run cells concurrently. Timings are then not comparable.
    pub parallel: bool,
}

impl BenchConfig {
    /// The desk-scale protocol: `n = 1000`, `d = 200`, `k = 20`, dense
    /// weights, `λ = 1`, 25 iterations, `t ∈ {4, 8, 12, 16, 20}`.
    pub fn desk_scale(seed: u64) -> Self {
        BenchConfig {
            dataset: DatasetSpec { n: 1000, d: 200, sd_target: 2.0, weights: WeightProfile::DensePaper },
            k: 20,
            lambda: 1.0,
            epsilon: 0.5,
            iterations: 25,
            sketch_sizes: vec![4, 8, 12, 16, 20],
            sketch_kind: SketchKind::Gaussian,
            algorithms: vec![Algorithm::Svd, Algorithm::Am, Algorithm::AmSketched],
            solver: Solver::Direct,
            seed,
            repetitions: 3,
            parallel: false,
        }
    }

    pub fn data_seed(&self) -> u64 {
        derive_seed(self.seed, 1)
    }

    pub fn weight_seed(&self) -> u64 {
        derive_seed(self.seed, 2)
    }

    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, 3)
    }

    /// Seeds of `(S′, S″)` for sketch size `t`.
    pub fn sketch_seeds(&self, t: usize) -> (u64, u64) {
        let base = derive_seed(self.seed, 4);
        (derive_seed(base, 2 * t as u64), derive_seed(base, 2 * t as u64 + 1))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchRecord {
    pub algorithm: Algorithm,
    pub sketch_rows: Option<usize>,
    pub objective_trace: Vec<f64>,
    pub final_objective: Option<f64>,
    /// Median wall-clock seconds over the repetitions.
    pub seconds: Option<f64>,
    pub init_seed: Option<u64>,
    pub sketch_seeds: Option<(u64, u64)>,
    pub regularization_share: Option<f64>,
    pub error: Option<String>,
}

/// Sketched versus unsketched alternating minimization at one sketch size.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchRatio {
    pub sketch_rows: usize,
    /// `sketched / unsketched` final objective.
    pub objective_ratio: f64,
    /// `unsketched / sketched` seconds; above 1 means sketching is faster.
    pub speedup: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub records: Vec<BenchRecord>,
    pub ratios: Vec<BenchRatio>,
    pub timings_comparable: bool,
}

impl BenchReport {
    pub fn record(&self, algorithm: Algorithm, sketch_rows: Option<usize>) -> Option<&BenchRecord> {
        self.records.iter().find(|r| r.algorithm == algorithm && r.sketch_rows == sketch_rows)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| WlraError::Format(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// One flat row per record: algorithm, t, final objective, seconds.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["algorithm", "sketch_rows", "final_objective", "seconds", "error"])?;
        for r in &self.records {
            let alg = serde_json::to_value(r.algorithm).map_err(|e| WlraError::Format(e.to_string()))?;
            w.write_record([
                alg.as_str().unwrap_or_default().to_string(),
                r.sketch_rows.map(|t| t.to_string()).unwrap_or_default(),
                r.final_objective.map(|v| format!("{v:?}")).unwrap_or_default(),
                r.seconds.map(|v| format!("{v:?}")).unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Generates the configured synthetic dataset and runs the sweep on it.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    let ds = &cfg.dataset;
    let a = gen_synthetic(ds.n, ds.d, ds.sd_target, cfg.lambda, cfg.data_seed())?;
    let w = gen_weights(ds.n, ds.d, &ds.weights, cfg.weight_seed())?;
    run_benchmark_on(a, w, cfg)
}

/// Runs the sweep on given data. Failing cells are recorded, not raised.
pub fn run_benchmark_on(a: DenseMatrix, w: DenseMatrix, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.repetitions == 0 {
        return Err(WlraError::param("repetitions must be positive"));
    }
    let problem = WlraProblem::new(a, w, cfg.k, cfg.lambda, cfg.epsilon)?;
    let mut cells: Vec<(Algorithm, Option<usize>)> = Vec::new();
    for alg in [Algorithm::Svd, Algorithm::Am] {
        if cfg.algorithms.contains(&alg) {
            cells.push((alg, None));
        }
    }
    if cfg.algorithms.contains(&Algorithm::AmSketched) {
        cells.extend(cfg.sketch_sizes.iter().map(|&t| (Algorithm::AmSketched, Some(t))));
    }

    let run = |&(alg, t): &(Algorithm, Option<usize>)| run_cell(&problem, cfg, alg, t);
    let records: Vec<BenchRecord> = if cfg.parallel {
        cells.par_iter().map(run).collect()
    } else {
        cells.iter().map(run).collect()
    };

    let mut ratios = Vec::new();
    if let Some(base) = records.iter().find(|r| r.algorithm == Algorithm::Am) {
        for r in records.iter().filter(|r| r.algorithm == Algorithm::AmSketched) {
            if let (Some(t), Some(fs), Some(fu), Some(ss), Some(su)) =
                (r.sketch_rows, r.final_objective, base.final_objective, r.seconds, base.seconds)
            {
                ratios.push(BenchRatio { sketch_rows: t, objective_ratio: fs / fu, speedup: su / ss });
            }
        }
    }
    Ok(BenchReport { config: cfg.clone(), records, ratios, timings_comparable: !cfg.parallel })
}

fn run_cell(problem: &WlraProblem, cfg: &BenchConfig, alg: Algorithm, t: Option<usize>) -> BenchRecord {
    let mut record = BenchRecord {
        algorithm: alg,
        sketch_rows: t,
        objective_trace: Vec::new(),
        final_objective: None,
        seconds: None,
        init_seed: None,
        sketch_seeds: None,
        regularization_share: None,
        error: None,
    };
    let outcome = (|| -> Result<()> {
        match alg {
            Algorithm::Svd => {
                let mut times = Vec::new();
                let mut f = None;
                for _ in 0..cfg.repetitions {
                    let tick = Instant::now();
                    f = Some(svd_baseline(problem.data(), problem.k())?);
                    times.push(tick.elapsed().as_secs_f64());
                }
                let f: Factorization = f.expect("at least one repetition");
                let obj = problem.weighted_objective(&f)?;
                record.objective_trace = vec![obj];
                record.final_objective = Some(obj);
                record.regularization_share = Some(share(problem.regularization(&f.u, &f.v), obj));
                record.seconds = Some(median(times));
            }
            Algorithm::Am | Algorithm::AmSketched => {
                let mut am = AmConfig::new(cfg.iterations, cfg.init_seed()).with_solver(cfg.solver);
                record.init_seed = Some(am.init_seed);
                if let Some(t) = t {
                    let (s1, s2) = cfg.sketch_seeds(t);
                    am = am.with_sketch(SketchSpec::new(cfg.sketch_kind, t, s1)?, SketchSpec::new(cfg.sketch_kind, t, s2)?);
                    record.sketch_seeds = Some((s1, s2));
                }
                let mut times = Vec::new();
                for _ in 0..cfg.repetitions {
                    let (_, report) = alternating_minimization(problem, &am)?;
                    times.push(report.total_seconds);
                    record.final_objective = Some(report.final_objective);
                    record.regularization_share = Some(report.regularization_share);
                    record.objective_trace = report.objective_trace;
                }
                record.seconds = Some(median(times));
            }
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        log::warn!("benchmark cell {alg:?} t={t:?} failed: {e}");
        record.error = Some(e.to_string());
    }
    record
}

fn share(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        part / whole
    } else {
        0.0
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

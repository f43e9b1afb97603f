use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use wlra::harness::bench::{Algorithm, BenchConfig, DatasetSpec};
use wlra::harness::{gen_synthetic, gen_weights, run_benchmark, verify_suite, VerifyParams, VerifySuite, WeightProfile};
use wlra::matrix::{read_matrix, write_matrix, WlraProblem};
use wlra::rng::derive_seed;
use wlra::sketch::{SketchKind, SketchSpec};
use wlra::wlra::{alternating_minimization, AmConfig, Solver};

#[derive(Parser)]
#[command(name = "wlra", version, about = "Regularized weighted low rank approximation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factor A ≈ UV under weights W by alternating minimization.
    Solve(SolveArgs),
    /// Generate synthetic data or weights.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Run the benchmark sweep (SVD, AM and sketched AM).
    Bench(BenchArgs),
    /// Run a verification suite; exit code 0 iff it passes.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 25)]
    iters: usize,
    /// Rows of both sketches; unsketched when omitted.
    #[arg(long)]
    sketch_rows: Option<usize>,
    #[arg(long, default_value = "gaussian")]
    sketch_kind: SketchKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// direct, richardson or precond.
    #[arg(long, default_value = "direct")]
    solver: Solver,
    /// Redraw the sketches every iteration.
    #[arg(long)]
    resample: bool,
    /// Report the estimated statistical dimension per iteration.
    #[arg(long)]
    track_sd: bool,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write U and V (`.bin` for binary, CSV otherwise).
    #[arg(long, num_args = 2, value_names = ["U", "V"])]
    save_factors: Option<Vec<PathBuf>>,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Random orthogonal factors, one singular value of 1e4, tuned tail.
    Synthetic {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 2.0)]
        sd_target: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// i.i.d. weights: dense, binary, uniform:<v> or custom:v=p,...
    Weights {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value = "dense")]
        profile: WeightProfile,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    d: usize,
    #[arg(long, default_value_t = 2.0)]
    sd_target: f64,
    #[arg(long, default_value = "dense")]
    weights: WeightProfile,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 25)]
    iters: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [4, 8, 12, 16, 20])]
    sketch_sizes: Vec<usize>,
    #[arg(long, default_value = "gaussian")]
    sketch_kind: SketchKind,
    #[arg(long, value_delimiter = ',', default_values = ["svd", "am", "am_sketched"])]
    algorithms: Vec<Algorithm>,
    #[arg(long, default_value = "direct")]
    solver: Solver,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    /// Run cells concurrently; timings are then not comparable.
    #[arg(long)]
    parallel: bool,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat CSV with one row per record.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// theorem31, lemma25, rounding, richardson, rank_reduce, objective_forms, sketch or all.
    suite: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    sd_target: Option<f64>,
    /// Sketch rows; the suite's recommended size when omitted.
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    kind: Option<SketchKind>,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            info!("wrote {}", path.display());
        }
        None => {
            let mut w = io::stdout().lock();
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let a = read_matrix(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let w = read_matrix(&args.weights).with_context(|| format!("reading {}", args.weights.display()))?;
    let problem = WlraProblem::new(a, w, args.k, args.lambda, args.epsilon)?;
    let mut cfg = AmConfig::new(args.iters, args.seed).with_solver(args.solver);
    cfg.resample_sketches = args.resample;
    cfg.track_statistical_dimension = args.track_sd;
    if let Some(t) = args.sketch_rows {
        cfg = cfg.with_sketch(
            SketchSpec::new(args.sketch_kind, t, derive_seed(args.seed, 1))?,
            SketchSpec::new(args.sketch_kind, t, derive_seed(args.seed, 2))?,
        );
    }
    let (n, d) = problem.shape();
    info!("solving n={n} d={d} k={} lambda={} transposed={}", args.k, args.lambda, problem.transposed());
    let (f, report) = alternating_minimization(&problem, &cfg)?;
    let f = f.in_original_orientation(&problem);
    if let Some(paths) = &args.save_factors {
        write_matrix(&f.u, &paths[0])?;
        write_matrix(&f.v, &paths[1])?;
    }
    let value = json!({
        "config": cfg,
        "working_shape": [n, d],
        "transposed_on_ingest": problem.transposed(),
        "k": args.k,
        "lambda": args.lambda,
        "epsilon": args.epsilon,
        "report": report,
        "factors": { "u": f.u, "v": f.v },
    });
    emit(&value, args.out.as_deref())
}

fn generate(cmd: GenCommand) -> Result<()> {
    let (m, out) = match cmd {
        GenCommand::Synthetic { n, d, sd_target, lambda, seed, out } => (gen_synthetic(n, d, sd_target, lambda, seed)?, out),
        GenCommand::Weights { n, d, profile, seed, out } => (gen_weights(n, d, &profile, seed)?, out),
    };
    write_matrix(&m, &out).with_context(|| format!("writing {}", out.display()))?;
    info!("wrote {}x{} matrix to {}", m.rows(), m.cols(), out.display());
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        dataset: DatasetSpec { n: args.n, d: args.d, sd_target: args.sd_target, weights: args.weights },
        k: args.k,
        lambda: args.lambda,
        epsilon: args.epsilon,
        iterations: args.iters,
        sketch_sizes: args.sketch_sizes,
        sketch_kind: args.sketch_kind,
        algorithms: args.algorithms,
        solver: args.solver,
        seed: args.seed,
        repetitions: args.repetitions,
        parallel: args.parallel,
    };
    let report = run_benchmark(&cfg)?;
    if let Some(path) = &args.csv {
        report.write_csv(path)?;
    }
    emit(&serde_json::to_value(&report)?, args.out.as_deref())
}

fn verify(args: VerifyArgs) -> Result<bool> {
    let suites: Vec<VerifySuite> = if args.suite.eq_ignore_ascii_case("all") {
        VerifySuite::ALL.to_vec()
    } else {
        vec![args.suite.parse()?]
    };
    let params = VerifyParams {
        seed: args.seed,
        trials: args.trials,
        n: args.n,
        d: args.d,
        k: args.k,
        lambda: args.lambda,
        epsilon: args.epsilon,
        sd_target: args.sd_target,
        ell: args.ell,
        kind: args.kind,
    };
    let mut outcomes = Vec::new();
    for s in suites {
        let o = verify_suite(s, &params)?;
        info!("{}: {}", s.name(), if o.passed { "pass" } else { "fail" });
        outcomes.push(o);
    }
    let passed = outcomes.iter().all(|o| o.passed);
    emit(&json!({ "passed": passed, "params": params, "suites": outcomes }), args.out.as_deref())?;
    Ok(passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a).map(|_| true),
        Command::Gen(g) => generate(g).map(|_| true),
        Command::Bench(b) => bench(b).map(|_| true),
        Command::Verify(v) => verify(v),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

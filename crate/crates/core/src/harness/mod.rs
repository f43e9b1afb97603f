//! Synthetic data, the experimental protocol and verification suites.

pub mod bench;
pub mod datasets;
pub mod verify;

pub use bench::{run_benchmark, run_benchmark_on, Algorithm, BenchConfig, BenchRatio, BenchRecord, BenchReport, DatasetSpec};
pub use datasets::{gen_low_rank_weights, gen_synthetic, gen_weights, random_orthonormal, WeightProfile};
pub use verify::{verify_suite, VerifyOutcome, VerifyParams, VerifySuite};

//! Regularized weighted low rank approximation.
//!
//! Minimizes `‖W ∘ (UV − A)‖_F² + λ‖U‖_F² + λ‖V‖_F²` by alternating best
//! responses, where each best response is a batch of ridge regressions that
//! may be compressed by a sketch whose size tracks the statistical dimension
//! of the regression matrices rather than the rank `k`.
//!
//! Modules:
//! - [`matrix`]: dense matrices, spectral quantities, the objective.
//! - [`sketch`]: Gaussian and CountSketch operators, distortion diagnostics.
//! - [`ridge`]: exact, sketched and Richardson ridge solvers.
//! - [`wlra`]: best responses, alternating minimization, SVD baseline,
//!   rank-reducing projection, weight rounding.
//! - [`harness`]: synthetic data, benchmarks and verification suites.

pub mod error;
pub mod harness;
pub mod matrix;
pub mod ridge;
pub mod rng;
pub mod sketch;
pub mod wlra;

pub use error::{Result, WlraError};
pub use matrix::{DenseMatrix, Factorization, WlraProblem};
pub use sketch::{Sketch, SketchKind, SketchSpec};

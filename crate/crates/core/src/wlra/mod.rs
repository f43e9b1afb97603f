//! The regularized weighted low rank approximation solver.

mod am;
mod best_response;
mod reduce;
mod rounding;

pub use am::{alternating_minimization, estimate_statistical_dimension, initialize, svd_baseline, AmConfig, SolveReport};
pub use best_response::{
    best_response_u, best_response_u_with, best_response_v, best_response_v_with, sketched_objective_u,
    sketched_objective_v, Solver, StepStats,
};
pub use reduce::{rank_reduce_projection, RankReduction};
pub use rounding::{round_to_power, round_weight_factors, RoundedWeights};

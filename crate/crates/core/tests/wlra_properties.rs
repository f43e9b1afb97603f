mod common;

use std::collections::HashSet;

use common::*;
use proptest::prelude::*;
use wlra::harness::{gen_synthetic, gen_weights, WeightProfile};
use wlra::matrix::{DenseMatrix, WlraProblem};
use wlra::sketch::{Sketch, SketchSpec};
use wlra::wlra::{
    alternating_minimization, best_response_u, best_response_v, rank_reduce_projection, round_weight_factors,
    round_to_power, sketched_objective_u, sketched_objective_v, svd_baseline, AmConfig,
};

fn random_problem(n: usize, d: usize, k: usize, lambda: f64, seed: u64) -> WlraProblem {
    WlraProblem::new(gaussian(n, d, seed), uniform(n, d, 0.0, 2.0, seed ^ 0x55), k, lambda, 0.5).unwrap()
}

fn weighted_instance(n: usize, d: usize, k: usize, seed: u64) -> WlraProblem {
    let a = gen_synthetic(n, d, 2.0, 1.0, seed).unwrap();
    let w = gen_weights(n, d, &WeightProfile::DensePaper, seed + 1).unwrap();
    WlraProblem::new(a, w, k, 1.0, 0.5).unwrap()
}

fn final_objective(p: &WlraProblem, cfg: &AmConfig) -> f64 {
    alternating_minimization(p, cfg).unwrap().1.final_objective
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn u_step_solves_each_row_ridge(n in 2usize..9, d in 2usize..7, k in 1usize..4, lambda in 0.05f64..3.0, seed in any::<u64>()) {
        let (n, d) = (n.max(d), n.min(d));
        let k = k.min(d);
        let p = random_problem(n, d, k, lambda, seed);
        let v = gaussian(k, d, seed ^ 3);
        let u = best_response_u(&p, &v, None).unwrap();
        for i in 0..n {
            let w = p.weights().row(i);
            let design = v.scale_columns(w).unwrap().transpose();
            let target: Vec<f64> = p.data().row(i).iter().zip(w).map(|(a, w)| a * w).collect();
            let oracle = ridge_oracle(&design, &target, lambda);
            for (x, y) in u.row(i).iter().zip(&oracle) {
                prop_assert!((x - y).abs() <= 1e-8 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn unsketched_steps_never_increase_the_objective(seed in any::<u64>(), lambda in 0.0f64..2.0) {
        let p = random_problem(10, 6, 3, lambda, seed);
        let u = gaussian(10, 3, seed ^ 1);
        let v = gaussian(3, 6, seed ^ 2);
        let before = objective_oracle(p.data(), p.weights(), &u, &v, lambda);
        let u2 = best_response_u(&p, &v, None).unwrap();
        let mid = objective_oracle(p.data(), p.weights(), &u2, &v, lambda);
        let v2 = best_response_v(&p, &u2, None).unwrap();
        let after = objective_oracle(p.data(), p.weights(), &u2, &v2, lambda);
        prop_assert!(mid <= before * (1.0 + 1e-10) + 1e-12);
        prop_assert!(after <= mid * (1.0 + 1e-10) + 1e-12);
    }

    #[test]
    fn alternating_trace_is_nonincreasing(seed in any::<u64>(), lambda in 0.01f64..2.0) {
        let p = random_problem(12, 7, 3, lambda, seed);
        let (_, rep) = alternating_minimization(&p, &AmConfig::new(8, seed)).unwrap();
        for w in rep.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10) + 1e-12);
        }
    }

    #[test]
    fn sketched_steps_never_increase_the_sketched_objective(rows in 1usize..8, seed in any::<u64>()) {
        let p = random_problem(14, 8, 3, 0.5, seed);
        let u = gaussian(14, 3, seed ^ 1);
        let v = gaussian(3, 8, seed ^ 2);
        let s1 = SketchSpec::gaussian(rows, seed).unwrap().realize(8);
        let s2 = SketchSpec::count_sketch(rows, seed ^ 9).unwrap().realize(14);
        let u2 = best_response_u(&p, &v, Some(&s1)).unwrap();
        let a = sketched_objective_u(&p, &u, &v, &s1).unwrap();
        let b = sketched_objective_u(&p, &u2, &v, &s1).unwrap();
        prop_assert!(b <= a * (1.0 + 1e-10) + 1e-12);
        let v2 = best_response_v(&p, &u2, Some(&s2)).unwrap();
        let c = sketched_objective_v(&p, &u2, &v, &s2).unwrap();
        let e = sketched_objective_v(&p, &u2, &v2, &s2).unwrap();
        prop_assert!(e <= c * (1.0 + 1e-10) + 1e-12);
    }

    #[test]
    fn v_step_mirrors_u_step_under_transposition(seed in any::<u64>(), lambda in 0.05f64..2.0) {
        let p = random_problem(7, 7, 3, lambda, seed);
        let q = WlraProblem::new(p.data().transpose(), p.weights().transpose(), 3, lambda, 0.5).unwrap();
        let u = gaussian(7, 3, seed ^ 4);
        let v = best_response_v(&p, &u, None).unwrap();
        let mirrored = best_response_u(&q, &u.transpose(), None).unwrap().transpose();
        prop_assert!(v.max_abs_diff(&mirrored).unwrap() <= 1e-10 * (1.0 + v.max_abs()));
    }

    #[test]
    fn svd_is_optimal_without_weights_or_regularizer(seed in any::<u64>(), k in 1usize..4) {
        let a = gaussian(12, 6, seed);
        let p = WlraProblem::new(a.clone(), DenseMatrix::filled(12, 6, 1.0).unwrap(), k, 0.0, 0.5).unwrap();
        let base = svd_baseline(&a, k).unwrap();
        let svd_obj = objective_oracle(&a, p.weights(), &base.u, &base.v, 0.0);
        let am = final_objective(&p, &AmConfig::new(30, seed));
        prop_assert!(am >= svd_obj * (1.0 - 1e-6));
    }

    #[test]
    fn rounding_sandwich_is_exact(seed in any::<u64>(), eps in 0.01f64..0.9) {
        let y = uniform(20, 2, 0.0, 5.0, seed).map(|v| if v < 0.5 { 0.0 } else { v }).unwrap();
        let z = uniform(2, 15, 0.0, 5.0, seed ^ 1).map(|v| if v < 0.5 { 0.0 } else { v }).unwrap();
        let r = round_weight_factors(&y, &z, eps).unwrap();
        let (lo, hi) = ((1.0 - eps).powi(2), (1.0 + eps).powi(2));
        for i in 0..20 {
            for j in 0..15 {
                let w: f64 = (0..2).map(|t| y.get(i, t) * z.get(t, j)).sum();
                let wp: f64 = (0..2).map(|t| r.y.get(i, t) * r.z.get(t, j)).sum();
                prop_assert!(lo * w <= wp && wp <= hi * w, "{} {} {}", w, wp, eps);
            }
        }
        for v in r.y.as_slice().iter().chain(r.z.as_slice()) {
            if *v != 0.0 {
                let e = (v.ln() / (1.0 + eps).ln()).round() as i32;
                prop_assert_eq!(*v, (1.0 + eps).powi(e));
            }
        }
        let rounded_rows: HashSet<Vec<u64>> = (0..20).map(|i| r.y.row(i).iter().map(|v| v.to_bits()).collect()).collect();
        prop_assert!(r.distinct_rows <= rounded_rows.len());
    }

    #[test]
    fn projection_is_idempotent_and_symmetric(rank in 1usize..4, rows in 1usize..6, seed in any::<u64>()) {
        let w = uniform(16, rank, 0.1, 1.0, seed).matmul(&uniform(rank, 10, 0.1, 1.0, seed ^ 1)).unwrap();
        let spp = SketchSpec::gaussian(rows, seed ^ 2).unwrap().realize(16).to_dense();
        let red = rank_reduce_projection(&w, &spp).unwrap();
        let p = &red.projection;
        prop_assert!(p.matmul(p).unwrap().max_abs_diff(p).unwrap() <= 1e-9);
        prop_assert!(p.max_abs_diff(&p.transpose()).unwrap() <= 1e-12);
        prop_assert!(red.rank <= red.weight_rank * rows);
    }
}

#[test]
fn round_to_power_arithmetic() {
    assert!((round_to_power(1.3, 0.1) - 1.331).abs() < 1e-12);
    assert_eq!(round_to_power(0.0, 0.1), 0.0);
}

#[test]
fn huge_lambda_shrinks_v() {
    let p = random_problem(10, 6, 3, 1e12, 8);
    let v = best_response_v(&p, &gaussian(10, 3, 9), None).unwrap();
    assert!(v.frobenius_norm() <= 1e-6 * p.data().frobenius_norm());
}

#[test]
fn exact_low_rank_input_is_recovered() {
    let a = gaussian(30, 3, 1).matmul(&gaussian(3, 12, 2)).unwrap();
    let p = WlraProblem::new(a.clone(), DenseMatrix::filled(30, 12, 1.0).unwrap(), 3, 0.0, 0.5).unwrap();
    let obj = final_objective(&p, &AmConfig::new(25, 4));
    assert!(obj <= 1e-6 * a.frobenius_norm_sq(), "{obj}");
}

#[test]
fn svd_baseline_on_diagonal_input() {
    let a = DenseMatrix::from_diagonal(&[1.0, 5.0, 3.0, 2.0]).unwrap();
    let f = svd_baseline(&a, 2).unwrap();
    let expected = DenseMatrix::from_diagonal(&[0.0, 5.0, 3.0, 0.0]).unwrap();
    assert!(f.product().max_abs_diff(&expected).unwrap() < 1e-12);
    let full = svd_baseline(&a, 4).unwrap();
    assert!(full.product().max_abs_diff(&a).unwrap() < 1e-9 * 5.0);
}

#[test]
fn identity_sketch_reduction_covers_row_supports() {
    let w = DenseMatrix::from_fn(6, 4, |i, j| if [0, 2, 3].contains(&i) { 1.0 + j as f64 } else { 0.0 }).unwrap();
    let red = rank_reduce_projection(&w, &Sketch::identity(6).to_dense()).unwrap();
    assert_eq!(red.rank, 3);
    for i in 0..6 {
        let want = if [0, 2, 3].contains(&i) { 1.0 } else { 0.0 };
        assert!((red.projection.get(i, i) - want).abs() < 1e-12);
    }
}

#[test]
fn sketched_am_stays_within_factor_of_unsketched() {
    let p = weighted_instance(200, 100, 10, 21);
    let exact = final_objective(&p, &AmConfig::new(25, 5));
    for t in 5..=10 {
        let cfg = AmConfig::new(25, 5).with_sketch(SketchSpec::gaussian(t, 100 + t as u64).unwrap(), SketchSpec::gaussian(t, 200 + t as u64).unwrap());
        let sketched = final_objective(&p, &cfg);
        assert!(sketched <= 1.5 * exact, "t = {t}: {sketched} vs {exact}");
    }
}

#[test]
fn quality_degrades_gracefully_with_fewer_rows() {
    let k = 20;
    let p = weighted_instance(200, 100, k, 33);
    let exact = final_objective(&p, &AmConfig::new(25, 6));
    for t in [k, k / 2, k / 4] {
        let cfg = AmConfig::new(25, 6).with_sketch(SketchSpec::gaussian(t, 7).unwrap(), SketchSpec::gaussian(t, 8).unwrap());
        let sketched = final_objective(&p, &cfg);
        assert!(sketched <= 1.5 * exact, "t = {t}: {sketched} vs {exact}");
    }
}

#[test]
fn svd_loses_to_am_on_weighted_instances() {
    for seed in [1, 2, 3] {
        let p = weighted_instance(150, 60, 8, seed);
        let base = svd_baseline(p.data(), 8).unwrap();
        let svd_obj = p.objective(&base.u, &base.v).unwrap();
        let am = final_objective(&p, &AmConfig::new(25, seed));
        assert!(svd_obj > am, "seed {seed}: svd {svd_obj} vs am {am}");
    }
}

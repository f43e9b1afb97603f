mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wlra::harness::verify::{random_containment_pair, ridge_ensemble, RidgeEnsembleConfig};
use wlra::matrix::{statistical_dimension, DenseMatrix};
use wlra::ridge::{
    batch_objective_ratio, build_preconditioner, evaluate_richardson_polynomial, richardson_polynomial, richardson_solve,
    ridge_solve, sketched_ridge_solve, RichardsonConfig, RidgeProblem,
};
use wlra::sketch::{recommended_sketch_size, Sketch, SketchSpec};

fn problem(n: usize, k: usize, lambda: f64, seed: u64) -> RidgeProblem {
    RidgeProblem::new(gaussian(n, k, seed), gaussian(n, 1, seed ^ 0xabc).into_vec(), lambda).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_solution_matches_normal_equation_oracle(n in 1usize..15, k in 1usize..6, lambda in 0.01f64..5.0, seed in any::<u64>()) {
        let p = problem(n, k, lambda, seed);
        let x = ridge_solve(&p).unwrap();
        let oracle = ridge_oracle(p.design(), p.target(), lambda);
        for (a, b) in x.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
        }
        let g = p.gradient(&x).unwrap();
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mtb = p.design().transpose_matvec(p.target()).unwrap().iter().map(|v| v * v).sum::<f64>().sqrt();
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(gn <= 1e-8 * (mtb + lambda * xn) + 1e-300);
    }

    #[test]
    fn identity_sketch_changes_nothing(n in 1usize..15, k in 1usize..6, lambda in 0.01f64..5.0, seed in any::<u64>()) {
        let p = problem(n, k, lambda, seed);
        let x = ridge_solve(&p).unwrap();
        let y = sketched_ridge_solve(&p, &Sketch::identity(n)).unwrap();
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn batch_ratio_is_at_least_one(rows in 1usize..12, seed in any::<u64>()) {
        let problems: Vec<_> = (0..4).map(|i| problem(20, 3, 0.5, seed.wrapping_add(i))).collect();
        let s = SketchSpec::gaussian(rows, seed).unwrap().realize(20);
        prop_assert!(batch_objective_ratio(&problems, &s).unwrap() >= 1.0 - 1e-9);
    }

    #[test]
    fn richardson_contracts_in_the_a_norm(dim in 2usize..10, eta in 0.05f64..1.0, seed in any::<u64>()) {
        let (a, b) = random_containment_pair(dim, eta, seed).unwrap();
        let rhs = gaussian(dim, 1, seed ^ 7).into_vec();
        let truth = solve_dense(&to_rows(&a), &rhs);
        let a_norm = |x: &[f64]| {
            let e: Vec<f64> = x.iter().zip(&truth).map(|(p, q)| p - q).collect();
            let ae = a.matvec(&e).unwrap();
            e.iter().zip(&ae).map(|(p, q)| p * q).sum::<f64>()
        };
        let mut prev = a_norm(&vec![0.0; dim]);
        for t in 1..15 {
            let cfg = RichardsonConfig { eta, max_iters: t, tau: 1e-300, exact_containment_check: true, probe_seed: seed };
            let out = richardson_solve(&a, &b, &rhs, &cfg).unwrap();
            prop_assert!(!out.containment_violated);
            let cur = a_norm(&out.x);
            prop_assert!(cur <= prev * (1.0 + 1e-9) + 1e-24);
            prev = cur;
        }
    }
}

#[test]
fn scalar_example() {
    let p = RidgeProblem::new(DenseMatrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap(), vec![1.0, 1.0], 1.0).unwrap();
    assert!((ridge_solve(&p).unwrap()[0] - 0.5).abs() < 1e-14);
    let zero = RidgeProblem::new(gaussian(5, 2, 1), vec![0.0; 5], 1.0).unwrap();
    assert_eq!(ridge_solve(&zero).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn matches_gradient_descent() {
    let p = problem(8, 3, 0.3, 42);
    let x = ridge_solve(&p).unwrap();
    let lip: f64 = p.design().frobenius_norm_sq() + p.lambda();
    let mut y = vec![0.0; 3];
    for _ in 0..200_000 {
        let g = p.gradient(&y).unwrap();
        for (yi, gi) in y.iter_mut().zip(&g) {
            *yi -= gi / lip;
        }
    }
    for (a, b) in x.iter().zip(&y) {
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
}

#[test]
fn perturbations_never_improve_the_optimum() {
    let p = problem(12, 4, 0.8, 3);
    let x = ridge_solve(&p).unwrap();
    let best = p.objective(&x).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let mut d: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nd = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        d.iter_mut().for_each(|v| *v *= 1e-3 / nd);
        let moved: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        assert!(p.objective(&moved).unwrap() > best);
    }
}

#[test]
fn zero_sketch_gives_zero() {
    let p = problem(6, 2, 1.0, 5);
    let y = sketched_ridge_solve(&p, &Sketch::from(DenseMatrix::zeros(3, 6))).unwrap();
    assert!(y.iter().all(|v| *v == 0.0));
}

#[test]
fn sketched_solution_is_usually_near_optimal() {
    let p = RidgeProblem::new(
        gaussian(200, 8, 77).scale_columns(&[4.0, 2.0, 1.0, 0.5, 0.25, 0.125, 0.06, 0.03]).unwrap(),
        gaussian(200, 1, 78).into_vec(),
        4.0,
    )
    .unwrap();
    let ell = recommended_sketch_size(statistical_dimension(p.design(), p.lambda()).unwrap(), 0.5).unwrap();
    let opt = p.objective(&ridge_solve(&p).unwrap()).unwrap();
    let good = (0..100)
        .filter(|&t| {
            let s = SketchSpec::gaussian(ell, 900 + t).unwrap().realize(200);
            p.objective(&sketched_ridge_solve(&p, &s).unwrap()).unwrap() <= 1.5 * opt
        })
        .count();
    assert!(good >= 80, "{good} of 100 at ell = {ell}");
}

#[test]
fn median_ratio_improves_with_more_rows() {
    let mut cfg = RidgeEnsembleConfig::standard(5);
    cfg.problems = 10;
    let ens = ridge_ensemble(&cfg).unwrap();
    let base = recommended_sketch_size(3.0, 0.5).unwrap();
    let medians: Vec<f64> = [base, 2 * base, 4 * base]
        .iter()
        .map(|&ell| {
            let r: Vec<f64> = (0..50)
                .map(|t| {
                    let s = SketchSpec::gaussian(ell, 300 + t).unwrap().realize(cfg.n);
                    batch_objective_ratio(&ens.problems, &s).unwrap()
                })
                .collect();
            median(&r)
        })
        .collect();
    assert!(medians[1] <= medians[0] && medians[2] <= medians[1], "{medians:?}");
}

#[test]
fn richardson_examples() {
    let eye = DenseMatrix::identity(3);
    let cfg = RichardsonConfig::new(1.0, 1, 1e-300).unwrap();
    let out = richardson_solve(&eye, &eye, &[1.0, 2.0, 3.0], &cfg).unwrap();
    assert_eq!(out.x, vec![1.0, 2.0, 3.0]);
    let out = richardson_solve(&eye, &eye, &[0.0; 3], &RichardsonConfig::new(0.5, 10, 1e-300).unwrap()).unwrap();
    assert!(out.x.iter().all(|v| *v == 0.0));

    let a = DenseMatrix::from_diagonal(&[1.0, 10.0]).unwrap();
    let steps = ((1.0f64 / 1e-6).ln() / 0.1).ceil() as usize;
    let out = richardson_solve(&a, &DenseMatrix::identity(2), &[1.0, 1.0], &RichardsonConfig::new(0.1, steps, 1e-300).unwrap()).unwrap();
    let truth = [1.0, 0.1];
    let err = ((out.x[0] - truth[0]).powi(2) + (out.x[1] - truth[1]).powi(2)).sqrt() / (1.01f64).sqrt();
    assert!(err <= 1e-6, "{err} after {steps}");
}

#[test]
fn polynomial_form_reproduces_iterates() {
    let (a, b) = random_containment_pair(6, 0.3, 12).unwrap();
    let rhs = gaussian(6, 1, 13).into_vec();
    for t in [1, 3, 8] {
        let it = richardson_solve(&a, &b, &rhs, &RichardsonConfig::new(0.3, t, 1e-300).unwrap()).unwrap();
        let poly = evaluate_richardson_polynomial(&a, &b, &rhs, &richardson_polynomial(0.3, t)).unwrap();
        for (p, q) in poly.iter().zip(&it.x) {
            assert!((p - q).abs() <= 1e-9 * (1.0 + q.abs()));
        }
    }
}

#[test]
fn preconditioner_examples() {
    let f = gaussian(30, 4, 2);
    let s = SketchSpec::gaussian(12, 1).unwrap().realize(30);
    let pre = build_preconditioner(&f, &s, 2.0, 2.0, 100).unwrap();
    let log = 100f64.ln();
    assert!((pre.eta - 1.0 / (log * log)).abs() < 1e-15);
    let sf = s.apply(&f).unwrap().scale(2.0);
    assert!(pre.matrix.max_abs_diff(&sf.gram().scale(1.0 / log)).unwrap() < 1e-9);

    let r = gaussian(3, 2, 4);
    let pre = build_preconditioner(&r, &Sketch::identity(3), 1.0, 1.0, 2).unwrap();
    assert!(pre.matrix.max_abs_diff(&r.gram()).unwrap() < 1e-12);
    assert!(build_preconditioner(&r, &Sketch::identity(3), 0.0, 1.0, 2).is_err());
}

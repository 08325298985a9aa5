mod common;

use common::{max_abs_diff, random_dataset, Dense};
use proptest::prelude::*;
use sifs::objective::{dual_gradient, dual_objective, duality_gap, primal_objective, recover_primal, soft_threshold};
use sifs::{alpha_max, beta_max, closed_form_reference, Params, SolutionPair};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn objectives_match_dense_evaluation() {
    for seed in 0..6 {
        let d = random_dataset(17 + seed as usize, 9 + 2 * seed as usize, seed);
        let dense = Dense::of(&d);
        let prm = Params::new(0.3 + 0.1 * seed as f64, 0.02 * (seed + 1) as f64, 0.25 + 0.1 * seed as f64).unwrap();
        let theta: Vec<f64> = (0..d.n()).map(|i| ((i * 7 + seed as usize) % 11) as f64 / 10.0).collect();
        let w: Vec<f64> = (0..d.p()).map(|j| (j as f64 - 4.0) * 0.1).collect();
        assert!(rel(primal_objective(&d, &w, &prm).unwrap(), dense.primal(&w, &prm)) < 1e-12);
        assert!(rel(dual_objective(&d, &theta, &prm).unwrap(), dense.dual(&theta, &prm)) < 1e-12);
        let g = dual_gradient(&d, &theta, &prm).unwrap();
        assert!(max_abs_diff(&g, &dense.grad(&theta, &prm)) < 1e-14);
        let wr = recover_primal(&d, &theta, &prm, None).unwrap();
        assert!(max_abs_diff(&wr, &dense.recover(&theta, &prm)) < 1e-14);
    }
}

#[test]
fn thresholds_match_dense_evaluation() {
    for seed in 0..8 {
        let d = random_dataset(23, 14, 100 + seed);
        let dense = Dense::of(&d);
        assert!(rel(beta_max(&d), dense.beta_max()) < 1e-12);
        for frac in [0.05, 0.2, 0.7] {
            let b = frac * dense.beta_max();
            let (a, e) = (alpha_max(&d, b, 0.4), dense.alpha_max(b, 0.4));
            assert!((a - e).abs() <= 1e-12 * e.abs().max(1.0), "{a} vs {e}");
        }
    }
}

#[test]
fn closed_form_is_optimal_for_the_dense_objective() {
    for seed in 0..5 {
        let d = random_dataset(31, 12, 200 + seed);
        let dense = Dense::of(&d);
        let beta = 0.4 * dense.beta_max();
        let amax = dense.alpha_max(beta, 0.5);
        assert!(amax > 0.0);
        for alpha in [amax, 1.5 * amax, 10.0 * amax] {
            let prm = Params::new(alpha, beta, 0.5).unwrap();
            let pair = closed_form_reference(&d, alpha, beta, 0.5).unwrap();
            assert!(pair.theta.iter().all(|&t| t == 1.0));
            assert!(dense.primal(&pair.w, &prm) + dense.dual(&pair.theta, &prm) <= 1e-12);
        }
    }
}

#[test]
fn dense_solver_reaches_the_closed_form() {
    let d = random_dataset(20, 8, 7);
    let dense = Dense::of(&d);
    let beta = 0.5 * dense.beta_max();
    let alpha = 1.2 * dense.alpha_max(beta, 0.5);
    let prm = Params::new(alpha, beta, 0.5).unwrap();
    let (w, theta) = dense.solve(&prm);
    let pair = closed_form_reference(&d, alpha, beta, 0.5).unwrap();
    assert!(max_abs_diff(&theta, &pair.theta) < 1e-6);
    assert!(max_abs_diff(&w, &pair.w) < 1e-6);
}

proptest! {
    #[test]
    fn soft_threshold_is_nonexpansive(a in -5.0..5.0f64, b in -5.0..5.0f64, beta in 0.0..3.0f64) {
        let s = soft_threshold(&[a, b], beta);
        prop_assert!((s[0] - s[1]).abs() <= (a - b).abs() + 1e-15);
        prop_assert!(s[0].abs() <= a.abs());
    }

    #[test]
    fn weak_duality_holds(
        seed in 0u64..1000,
        ts in proptest::collection::vec(0.0..=1.0f64, 15),
        ws in proptest::collection::vec(-2.0..2.0f64, 6),
        alpha in 0.01..5.0f64,
        bfrac in 0.0..1.5f64,
        gamma in 0.05..0.95f64,
    ) {
        let d = random_dataset(15, 6, seed);
        let prm = Params::new(alpha, bfrac * beta_max(&d), gamma).unwrap();
        let gap = duality_gap(&d, &SolutionPair { w: ws, theta: ts.clone() }, &prm).unwrap();
        prop_assert!(gap.gap >= -1e-9);
        let w = recover_primal(&d, &ts, &prm, None).unwrap();
        let g = duality_gap(&d, &SolutionPair { w, theta: ts }, &prm).unwrap();
        prop_assert!(g.gap >= -1e-9);
    }
}

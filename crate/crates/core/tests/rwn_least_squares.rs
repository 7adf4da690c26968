mod common;

use common::{cholesky_solve, frobenius, gaussian_matrix, matrix_of_rank};
use hawkfs::linalg::pinv_solve;
use hawkfs::rwn::{self, one_hot, solve_output_weights, RwnConfig, RwnModel};
use ndarray::Array2;
use rand::Rng;

fn residual(h: &Array2<f64>, b: &Array2<f64>, t: &Array2<f64>) -> f64 {
    frobenius(&(h.dot(b) - t))
}

#[test]
fn full_rank_solution_matches_normal_equations() {
    let mut r = common::rng(11);
    for _ in 0..20 {
        let n = r.random_range(20..120);
        let h = r.random_range(2..16);
        let hm = gaussian_matrix(n, h, &mut r);
        let t = gaussian_matrix(n, 3, &mut r);
        let ours = solve_output_weights(&hm, &t).unwrap();
        let oracle = cholesky_solve(&hm.t().dot(&hm), &hm.t().dot(&t)).unwrap();
        let err = frobenius(&(&ours - &oracle)) / frobenius(&oracle);
        assert!(err < 1e-9, "relative gap {err}");
    }
}

#[test]
fn rank_deficient_solution_is_least_squares_and_minimum_norm() {
    let mut r = common::rng(12);
    for _ in 0..20 {
        let n = r.random_range(10..80);
        let h = r.random_range(4..30);
        let rank = r.random_range(1..h.min(n));
        let hm = matrix_of_rank(n, h, rank, &mut r);
        let t = gaussian_matrix(n, 2, &mut r);
        let b = pinv_solve(&hm, &t).unwrap();
        let normal = frobenius(&hm.t().dot(&(hm.dot(&b) - &t))) / frobenius(&hm.t().dot(&t));
        assert!(normal <= 1e-8, "normal-equation residual {normal}");
        let base = residual(&hm, &b, &t);
        for _ in 0..10 {
            let delta = gaussian_matrix(h, 2, &mut r) * 1e-3;
            assert!(residual(&hm, &(&b + &delta), &t) >= base - 1e-12);
        }
        // a null-space direction keeps the residual but grows the norm
        let null = {
            let p = hawkfs::linalg::pseudoinverse(&hm).unwrap().dot(&hm);
            let z = gaussian_matrix(h, 2, &mut r);
            &z - &p.dot(&z)
        };
        if frobenius(&null) > 1e-6 {
            let moved = &b + &null;
            assert!((residual(&hm, &moved, &t) - base).abs() < 1e-8 * (1.0 + base));
            assert!(frobenius(&moved) > frobenius(&b));
        }
    }
}

#[test]
fn separable_blobs_reach_zero_training_error() {
    let d = common::blobs(200, 0.05, 3);
    let model = rwn::train(d.features.view(), &d.labels, 2, RwnConfig::new(50, 9)).unwrap();
    assert_eq!(model.predict(d.features.view()).unwrap(), d.labels);
}

#[test]
fn hidden_layer_matches_elementwise_sigmoid() {
    let d = common::blobs(30, 0.1, 4);
    let model = RwnModel::init(2, 2, RwnConfig::new(7, 5)).unwrap();
    let h = model.hidden_activations(d.features.view()).unwrap();
    for i in 0..30 {
        for k in 0..7 {
            let z: f64 = (0..2).map(|j| model.input_weights[[k, j]] * d.features[[i, j]]).sum::<f64>()
                + model.hidden_biases[k];
            assert!((h[[i, k]] - 1.0 / (1.0 + (-z).exp())).abs() < 1e-15);
        }
    }
    assert!(model.input_weights.iter().chain(model.hidden_biases.iter()).all(|w| (-1.0..=1.0).contains(w)));
}

#[test]
fn output_layer_is_the_least_squares_fit_of_one_hot_targets() {
    let d = common::blobs(120, 0.2, 6);
    let model = rwn::train(d.features.view(), &d.labels, 2, RwnConfig::new(12, 1)).unwrap();
    let h = model.hidden_activations(d.features.view()).unwrap();
    let t = one_hot(&d.labels, 2);
    let normal = frobenius(&h.t().dot(&(h.dot(&model.output_weights) - &t))) / frobenius(&h.t().dot(&t));
    assert!(normal <= 1e-8, "{normal}");
    // sigmoid features are ill-conditioned, so compare fitted values
    let oracle = cholesky_solve(&h.t().dot(&h), &h.t().dot(&t)).unwrap();
    let fitted = h.dot(&model.output_weights);
    let gap = frobenius(&(&fitted - &h.dot(&oracle))) / frobenius(&fitted);
    assert!(gap < 1e-6, "{gap}");
}

mod common;

use common::{loglog_slope, max_diff, random_generator, random_model, rng, Shape};
use strongeq::equilibrium::{gamma_row, lambda_full, Baseline};
use strongeq::payoff::{
    concat_payoff_vector, payoff_vector, payoff_vector_quadrature, shifted_payoff_vector,
    transition_matrix,
};
use strongeq::GeneratorMatrix;

#[test]
fn resolvent_matches_quadrature_on_random_models() {
    let mut r = rng(10);
    for k in 0..50 {
        let n = 2 + k % 4;
        let model = random_model(&mut r, n, Shape::Cubic);
        let q = random_generator(&mut r, &model);
        let a = payoff_vector(&model, &q).unwrap();
        let b = payoff_vector_quadrature(&model, &q).unwrap();
        let d = max_diff(&a.values, &b.values);
        assert!(d <= 1e-8, "model {k}: {d:e}");
    }
}

#[test]
fn transition_semigroup() {
    let mut r = rng(11);
    for _ in 0..20 {
        let model = random_model(&mut r, 4, Shape::Cubic);
        let q = random_generator(&mut r, &model);
        let (s, t) = (0.37, 1.9);
        let lhs = transition_matrix(&q, s + t).unwrap();
        let rhs = transition_matrix(&q, s).unwrap() * transition_matrix(&q, t).unwrap();
        assert!((lhs - rhs).amax() <= 1e-10);
    }
}

/// `(F(i, Q ⊗_ε Q*) − F_ε(i, Q*)) / ε` approaches `g_i(Q_i) + Q_i · F(Q*)` linearly.
#[test]
fn first_order_expansion() {
    let mut r = rng(12);
    let eps = [1e-2, 5e-3, 2.5e-3];
    for _ in 0..10 {
        let model = random_model(&mut r, 3, Shape::Cubic);
        let qstar = random_generator(&mut r, &model);
        let q = random_generator(&mut r, &model);
        let f = payoff_vector(&model, &qstar).unwrap();
        for i in 0..3 {
            let gamma = gamma_row(&model, i, &q.row(i), &f).unwrap();
            let resid: Vec<f64> = eps
                .iter()
                .map(|&e| {
                    let c = concat_payoff_vector(&model, &q, &qstar, e).unwrap()[i];
                    let s = shifted_payoff_vector(&model, &qstar, e).unwrap().values[i];
                    (c - s) / e - gamma
                })
                .collect();
            if resid.iter().all(|v| v.abs() < 1e-9) {
                continue;
            }
            assert!(loglog_slope(&eps, &resid) >= 0.9, "{resid:?}");
        }
    }
}

/// Removing both expansion terms leaves a cubic remainder.
#[test]
fn second_order_expansion() {
    let mut r = rng(13);
    let eps: Vec<f64> = (0..5).map(|k| 0.04 * 0.5f64.powi(k)).collect();
    for _ in 0..10 {
        let model = random_model(&mut r, 3, Shape::Cubic);
        let qstar = random_generator(&mut r, &model);
        let q = random_generator(&mut r, &model);
        let base = Baseline::new(&model, &qstar).unwrap();
        for i in 0..3 {
            let l1 = gamma_row(&model, i, &qstar.row(i), &base.f).unwrap()
                - gamma_row(&model, i, &q.row(i), &base.f).unwrap();
            let l2 = 0.5
                * (lambda_full(&model, i, &qstar, &base).unwrap()
                    - lambda_full(&model, i, &q, &base).unwrap());
            let resid: Vec<f64> = eps
                .iter()
                .map(|&e| {
                    let d =
                        base.f.values[i] - concat_payoff_vector(&model, &q, &qstar, e).unwrap()[i];
                    d - l1 * e - l2 * e * e
                })
                .collect();
            let slope = loglog_slope(&eps, &resid);
            assert!(slope >= 2.7, "slope {slope}: {resid:?}");
        }
    }
}

#[test]
fn concatenating_a_control_with_itself_changes_nothing() {
    let mut r = rng(14);
    let model = random_model(&mut r, 3, Shape::Concave);
    let q: GeneratorMatrix = random_generator(&mut r, &model);
    let f = payoff_vector(&model, &q).unwrap();
    for e in [0.0, 0.1, 2.0] {
        let c = concat_payoff_vector(&model, &q, &q, e).unwrap();
        assert!(max_diff(&c, &f.values) < 1e-12);
    }
}

mod common;

use common::{random_mixture, rng};
use rand::Rng;
use strongeq::montecarlo::{
    estimate_concat_payoff, estimate_payoff, segment_integral, simulate_path,
};
use strongeq::payoff::{concat_payoff_vector, payoff_vector};
use strongeq::quadrature::integrate;
use strongeq::twostate::builtin;
use strongeq::GeneratorMatrix;

#[test]
fn segment_integrals_are_exact() {
    let mut r = rng(50);
    for _ in 0..50 {
        let d = random_mixture(&mut r);
        let s = r.random_range(0.0..10.0);
        let e = s + r.random_range(0.0..3.0);
        let exact = segment_integral(&d, s, e).unwrap();
        let quad = integrate(|t| d.value(t), s, e, 1e-15).unwrap();
        assert!((exact - quad).abs() <= 1e-12, "{exact} vs {quad}");
    }
}

#[test]
fn same_seed_same_stream() {
    let model = builtin("eg41").unwrap().model.to_model_spec().unwrap();
    let q = GeneratorMatrix::two_state(5.0 / 12.0, 7.0 / 12.0);
    assert_eq!(
        simulate_path(&q, 0, 30.0, 9).unwrap(),
        simulate_path(&q, 0, 30.0, 9).unwrap()
    );
    let a = estimate_payoff(&model, &q, 1, 500, 4).unwrap();
    let b = estimate_payoff(&model, &q, 1, 500, 4).unwrap();
    assert_eq!(a.mean, b.mean);
    assert_eq!(a.std_error, b.std_error);
    let c = estimate_payoff(&model, &q, 1, 500, 5).unwrap();
    assert_ne!(a.mean, c.mean);
}

#[test]
fn three_se_intervals_cover() {
    let model = builtin("eg41").unwrap().model.to_model_spec().unwrap();
    let q = GeneratorMatrix::two_state(5.0 / 12.0, 7.0 / 12.0);
    let exact = payoff_vector(&model, &q).unwrap().values[0];
    let hits = (0..200u64)
        .filter(|&s| {
            estimate_payoff(&model, &q, 0, 2000, 1000 + s)
                .unwrap()
                .covers(exact, 3.0)
        })
        .count();
    assert!(hits >= 198, "{hits}/200");
}

#[test]
fn concatenated_estimate_tracks_resolvent() {
    let model = builtin("eg43").unwrap().model.to_model_spec().unwrap();
    let qs = GeneratorMatrix::two_state(5.0 / 12.0, 7.0 / 12.0);
    let dev = GeneratorMatrix::two_state(2.0, 0.0);
    for (i, eps) in [(0, 0.5), (1, 1.5)] {
        let exact = concat_payoff_vector(&model, &dev, &qs, eps).unwrap()[i];
        let est = estimate_concat_payoff(&model, i, &dev, &qs, eps, 20_000, 77).unwrap();
        assert!(est.covers(exact, 4.0), "{} vs {exact}", est.mean);
    }
}

mod common;

use common::{random_generator, random_mixture, random_model, rng, Shape};
use proptest::prelude::*;
use strongeq::quadrature::integrate;
use strongeq::{validate_generator, GeneratorMatrix};

#[test]
fn accepted_generators_reconstruct_their_diagonal() {
    let mut r = rng(1);
    for n in 2..=5 {
        let model = random_model(&mut r, n, Shape::Cubic);
        for _ in 0..20 {
            let q = random_generator(&mut r, &model);
            assert!(validate_generator(&model, &q).is_valid());
            for i in 0..n {
                let off: f64 = (0..n).filter(|&j| j != i).map(|j| q.get(i, j)).sum();
                assert_eq!(q.get(i, i), -off);
            }
        }
    }
}

#[test]
fn gradients_match_centered_differences() {
    let mut r = rng(2);
    for _ in 0..10 {
        let n = 3;
        let model = random_model(&mut r, n, Shape::Cubic);
        for i in 0..n {
            for _ in 0..100 {
                let q = common::random_row(&mut r, &model, i);
                let grad = model.payoff().gradient(i, &q).unwrap();
                for j in (0..n).filter(|&j| j != i) {
                    let h = 1e-6 * (1.0 + q[j].abs());
                    let mut up = q.clone();
                    let mut dn = q.clone();
                    up[j] += h;
                    dn[j] -= h;
                    if dn[j] < 0.0 {
                        continue;
                    }
                    let fd = (model.payoff().value(i, &up).unwrap()
                        - model.payoff().value(i, &dn).unwrap())
                        / (2.0 * h);
                    let tol = 1e-6 * (1.0 + grad[j].abs());
                    assert!((fd - grad[j]).abs() <= tol, "{fd} vs {}", grad[j]);
                }
            }
        }
    }
}

#[test]
fn mixture_starts_at_one_with_closed_form_mass() {
    let mut r = rng(3);
    for _ in 0..20 {
        let d = random_mixture(&mut r);
        assert!((d.value(0.0) - 1.0).abs() < 1e-15);
        let (w, rates) = d.components().unwrap();
        let closed: f64 = w.iter().zip(rates).map(|(w, r)| w / r).sum();
        assert!((d.total_mass().unwrap() - closed).abs() < 1e-15);
        let t = 60.0;
        let quad = integrate(|s| d.value(s), 0.0, t, 1e-13).unwrap() + d.tail_mass(t);
        assert!((quad - closed).abs() < 1e-10, "{quad} vs {closed}");
    }
}

proptest! {
    #[test]
    fn off_diagonal_rows_always_round_trip(rows in prop::collection::vec(prop::collection::vec(0.0f64..5.0, 3), 3)) {
        let off: Vec<Vec<f64>> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().enumerate().map(|(j, v)| if i == j { 0.0 } else { *v }).collect())
            .collect();
        let q = GeneratorMatrix::from_off_diagonal(&off).unwrap();
        prop_assert!(q.check_structure(1e-12).is_ok());
        let again = GeneratorMatrix::from_rows(&q.rows()).unwrap();
        prop_assert_eq!(again, q);
    }
}

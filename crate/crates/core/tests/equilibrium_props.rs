mod common;

use common::{random_model, random_row, rng, Shape};
use strongeq::equilibrium::{
    default_eps_grid, expansion_probe, fixed_point_solve, gamma_row, strong_check, weak_check,
    EquilibriumOptions, SolveConfig, Verdict, Witness,
};
use strongeq::payoff::payoff_vector;
use strongeq::twostate::{builtin, eg42_astar};
use strongeq::{GeneratorMatrix, ModelSpec};

fn example_model(id: &str) -> ModelSpec {
    builtin(id).unwrap().model.to_model_spec().unwrap()
}

/// Γ at every solved candidate beats 10³ random feasible rows, independent of
/// the row optimizer.
#[test]
fn random_probe_audit_of_solved_candidates() {
    let mut r = rng(20);
    let cfg = SolveConfig::default();
    for k in 0..6 {
        let n = 2 + k % 2;
        let model = random_model(&mut r, n, Shape::Concave);
        let out = fixed_point_solve(&model, &cfg).unwrap();
        assert!(out.converged(), "model {k}");
        for c in &out.candidates {
            let f = payoff_vector(&model, &c.generator).unwrap();
            for row in &c.weak.rows {
                let i = row.state;
                let star = gamma_row(&model, i, &c.generator.row(i), &f).unwrap();
                for _ in 0..1000 {
                    let q = random_row(&mut r, &model, i);
                    let g = gamma_row(&model, i, &q, &f).unwrap();
                    assert!(star >= g - row.tie_tol, "state {i}: {star} < {g}");
                }
            }
        }
    }
}

fn assert_witness_sound(model: &ModelSpec, qstar: &GeneratorMatrix, opts: &EquilibriumOptions) {
    let rep = strong_check(model, qstar, opts).unwrap();
    if rep.verdict != Verdict::WeakNotStrong {
        return;
    }
    match rep.witness.expect("weak-not-strong carries a witness") {
        Witness::SecondOrder { state, row, .. } => {
            let dev = qstar.with_row(state, &row);
            let p = expansion_probe(model, state, &dev, qstar, &opts.eps_grid).unwrap();
            assert!(p.negative_at_smallest(), "{:?}", p.differences);
        }
        Witness::Sweep { differences, .. } => {
            let n = differences.len();
            assert!(differences[n - 3..].iter().all(|&d| d < 0.0));
        }
        Witness::FirstOrder { .. } => panic!("first-order witness on a weak candidate"),
    }
}

#[test]
fn weak_not_strong_witnesses_are_confirmed_by_probes() {
    let opts = EquilibriumOptions::default();
    assert_witness_sound(
        &example_model("eg43"),
        &GeneratorMatrix::two_state(5.0 / 12.0, 7.0 / 12.0),
        &opts,
    );
    assert_witness_sound(&example_model("eg51"), &GeneratorMatrix::zeros(2), &opts);
    let mut r = rng(21);
    for _ in 0..6 {
        let model = random_model(&mut r, 3, Shape::Concave);
        for c in fixed_point_solve(&model, &SolveConfig::default())
            .unwrap()
            .candidates
        {
            assert_witness_sound(&model, &c.generator, &opts);
        }
    }
}

#[test]
fn verdicts_survive_payoff_scaling() {
    let opts = EquilibriumOptions::default();
    let cases = [
        ("eg41", GeneratorMatrix::two_state(5.0 / 12.0, 7.0 / 12.0)),
        ("eg42", GeneratorMatrix::two_state(eg42_astar(), 0.0)),
        ("eg43", GeneratorMatrix::two_state(5.0 / 12.0, 7.0 / 12.0)),
        ("eg51", GeneratorMatrix::zeros(2)),
        ("eg41", GeneratorMatrix::two_state(0.1, 0.2)),
    ];
    for (id, q) in cases {
        let model = example_model(id);
        let v = strong_check(&model, &q, &opts).unwrap().verdict;
        for c in [1e-3, 0.1, 10.0, 1e3] {
            let scaled = model.scaled_payoff(c).unwrap();
            assert_eq!(
                strong_check(&scaled, &q, &opts).unwrap().verdict,
                v,
                "{id} × {c}"
            );
        }
    }
}

/// Interior first-order condition in state 1 and the boundary inequality in
/// state 2 for the boundary example.
#[test]
fn boundary_example_first_order_system() {
    let ex = builtin("eg42").unwrap();
    let model = ex.model.to_model_spec().unwrap();
    let out = fixed_point_solve(&model, &SolveConfig::default()).unwrap();
    assert_eq!(out.candidates.len(), 1);
    let q = &out.candidates[0].generator;
    let (a, b) = (q.get(0, 1), q.get(1, 0));
    assert_eq!(b, 0.0);
    let [r1, r2] = ex.model.first_order_residuals(a, b).unwrap();
    assert!(r1.abs() <= 1e-9, "{r1}");
    assert!(r2 <= 1e-9, "{r2}");
    assert!(
        weak_check(&model, q, &EquilibriumOptions::default())
            .unwrap()
            .weak
    );
}

#[test]
fn probe_on_first_order_deviation_has_order_one() {
    let model = example_model("eg41");
    let qstar = GeneratorMatrix::two_state(5.0 / 12.0, 7.0 / 12.0);
    let dev = GeneratorMatrix::two_state(1.0, 7.0 / 12.0);
    let p = expansion_probe(&model, 0, &dev, &qstar, &default_eps_grid()).unwrap();
    assert!((p.fitted_order.unwrap() - 1.0).abs() < 0.05);
    let c = p.fitted_coefficient.unwrap();
    assert!((c - p.analytic_l1).abs() <= 0.02 * p.analytic_l1.abs());
    assert!(p.analytic_l1 > 0.0);
}

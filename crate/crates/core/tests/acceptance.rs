//! End-to-end acceptance criteria, one PASS/FAIL line each.

mod common;

use std::time::Instant;

use common::{random_generator, random_model, rng, Shape};
use strongeq::discrete::{
    convergence_run, discrete_equilibrium_check, discrete_solve, discretize, ConvergenceConfig,
    TransitionMatrix,
};
use strongeq::equilibrium::{
    default_eps_grid, expansion_probe, fixed_point_solve, lambda_bar_row, lambda_full,
    strong_check, weak_check, Baseline, EquilibriumOptions, SolveConfig, SolvedCandidate, Verdict,
    Witness,
};
use strongeq::montecarlo::{estimate_concat_payoff, estimate_payoff};
use strongeq::payoff::{concat_payoff_vector, payoff_vector, payoff_vector_quadrature};
use strongeq::twostate::{builtin, eg42_astar, eg42_equation, eg51, eg52_discrete_equilibrium};
use strongeq::{GeneratorMatrix, ModelSpec};

/// Outcome of one criterion: failed sub-checks and informational notes.
#[derive(Default)]
struct Outcome {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }
}

fn spec(id: &str) -> ModelSpec {
    builtin(id).unwrap().model.to_model_spec().unwrap()
}

fn ab(q: &GeneratorMatrix) -> (f64, f64) {
    (q.get(0, 1), q.get(1, 0))
}

fn near(cands: &[SolvedCandidate], a: f64, b: f64) -> Option<&SolvedCandidate> {
    let t = GeneratorMatrix::two_state(a, b);
    cands.iter().min_by(|x, y| {
        x.generator
            .max_abs_diff(&t)
            .total_cmp(&y.generator.max_abs_diff(&t))
    })
}

fn interior_strong(o: &mut Outcome) {
    let t = Instant::now();
    let model = spec("eg41");
    let cfg = SolveConfig::default();
    let out = fixed_point_solve(&model, &cfg).unwrap();
    let Some(c) = near(&out.candidates, 5.0 / 12.0, 7.0 / 12.0) else {
        return o.check(false, "no candidate");
    };
    let (a, b) = ab(&c.generator);
    let v = strong_check(&model, &c.generator, &cfg.options)
        .unwrap()
        .verdict;
    let secs = t.elapsed().as_secs_f64();
    o.check((a - 5.0 / 12.0).abs() <= 1e-8, format!("a* = {a}"));
    o.check((b - 7.0 / 12.0).abs() <= 1e-8, format!("b* = {b}"));
    o.check(v == Verdict::Strong, format!("verdict {}", v.as_str()));
    o.check(secs <= 1.0, format!("runtime {secs:.3}s"));
    o.note(format!(
        "(a*, b*) = ({a:.12}, {b:.12}), {}, {secs:.3}s",
        v.as_str()
    ));
}

fn boundary_strong(o: &mut Outcome) {
    let model = spec("eg42");
    let cfg = SolveConfig::default();
    let out = fixed_point_solve(&model, &cfg).unwrap();
    let Some(c) = near(&out.candidates, 0.595, 0.0) else {
        return o.check(false, "no candidate");
    };
    let (a, b) = ab(&c.generator);
    let oracle = eg42_astar();
    let v = strong_check(&model, &c.generator, &cfg.options)
        .unwrap()
        .verdict;
    o.check(b == 0.0, format!("b* = {b}"));
    o.check(
        eg42_equation(a).abs() <= 1e-10,
        format!("residual {:e}", eg42_equation(a)),
    );
    o.check(
        a > 0.59 && a < 0.60,
        format!("a* = {a} outside (0.59, 0.60)"),
    );
    o.check(
        oracle > 0.59 && oracle < 0.60 && (a - oracle).abs() <= 1e-9,
        "bisection oracle disagrees",
    );
    o.check(v == Verdict::Strong, format!("verdict {}", v.as_str()));
    o.note(format!(
        "a* = {a:.12}, residual {:.1e}, {}",
        eg42_equation(a),
        v.as_str()
    ));
}

fn two_candidates(o: &mut Outcome) {
    let model = spec("eg43");
    let opts = EquilibriumOptions::default();
    let qs = GeneratorMatrix::two_state(5.0 / 12.0, 7.0 / 12.0);
    o.check(
        weak_check(&model, &qs, &opts).unwrap().weak,
        "weak check rejects (5/12, 7/12)",
    );
    let rep = strong_check(&model, &qs, &opts).unwrap();
    o.check(
        rep.verdict == Verdict::WeakNotStrong,
        format!("verdict {}", rep.verdict.as_str()),
    );
    o.check(
        rep.witness.as_ref().map(Witness::state) == Some(1),
        "witness not in state 2",
    );
    let base = Baseline::new(&model, &qs).unwrap();
    for b in [0.0, 7.0 / 24.0, 7.0 / 12.0] {
        let v = lambda_bar_row(&model, 1, &[b, -b], &base.g, &base.gamma).unwrap();
        let want = -b / 12.0 - 579.0 / 288.0;
        o.check(
            (v - want).abs() <= 1e-9,
            format!("Λ̄({b}) = {v}, want {want}"),
        );
    }
    let out = fixed_point_solve(&model, &SolveConfig::default()).unwrap();
    match out.candidates.iter().find(|c| c.generator.get(1, 0) == 0.0) {
        None => o.check(false, "(ā, 0) not found"),
        Some(c) => {
            let abar = c.generator.get(0, 1);
            let v = strong_check(&model, &c.generator, &opts).unwrap().verdict;
            o.check((abar - 0.42364).abs() <= 5e-5, format!("ā = {abar}"));
            o.check(
                v == Verdict::Strong,
                format!("(ā, 0) verdict {}", v.as_str()),
            );
            o.note(format!(
                "ā = {abar:.9} {}, (5/12, 7/12) {}",
                v.as_str(),
                rep.verdict.as_str()
            ));
        }
    }
}

fn deviation_incentive(o: &mut Outcome) {
    let model = spec("eg43");
    let qs = GeneratorMatrix::two_state(5.0 / 12.0, 7.0 / 12.0);
    let dev = GeneratorMatrix::two_state(5.0 / 12.0, 0.0);
    let p = expansion_probe(&model, 1, &dev, &qs, &default_eps_grid()).unwrap();
    for (e, d) in p.eps.iter().zip(&p.differences) {
        if *e <= 1e-2 {
            o.check(*d < 0.0, format!("difference {d:e} at ε = {e:e}"));
        }
    }
    let order = p.fitted_order.unwrap_or(f64::NAN);
    let coef = p.fitted_coefficient.unwrap_or(f64::NAN);
    let want = -7.0 / 288.0;
    o.check((order - 2.0).abs() <= 0.1, format!("fitted order {order}"));
    o.check(
        (coef - want).abs() <= 0.05 * want.abs(),
        format!("coefficient {coef}"),
    );
    o.note(format!(
        "order {order:.4}, coefficient {coef:.6} vs {want:.6}"
    ));
}

fn expansion_orders(o: &mut Outcome) {
    let mut r = rng(500);
    let grid = default_eps_grid();
    let (mut first, mut second) = (0, 0);
    for k in 0..20 {
        let n = 2 + k % 3;
        let model = random_model(&mut r, n, Shape::Cubic);
        let qs = random_generator(&mut r, &model);
        let other = random_generator(&mut r, &model);
        for i in 0..n {
            // Whole-row deviation: first order.
            let dev = qs.with_row(i, &other.row(i));
            let p = expansion_probe(&model, i, &dev, &qs, &grid).unwrap();
            if p.analytic_l1.abs() > 1e-6 {
                let c = p.fitted_coefficient.unwrap_or(f64::NAN);
                o.check(
                    (c - p.analytic_l1).abs() <= 0.02 * p.analytic_l1.abs(),
                    format!("model {k} state {i}: L₁ fit {c} vs {}", p.analytic_l1),
                );
                first += 1;
            }
            // Row i kept, other rows moved: a Γ tie decided at second order.
            let mut tie = other.clone();
            tie.set_row(i, &qs.row(i));
            let p = expansion_probe(&model, i, &tie, &qs, &grid).unwrap();
            if p.analytic_l2.abs() > 1e-6 {
                let order = p.fitted_order.unwrap_or(f64::NAN);
                let c = p.fitted_coefficient.unwrap_or(f64::NAN);
                o.check(
                    order >= 1.9,
                    format!("model {k} state {i}: tie order {order}"),
                );
                o.check(
                    (c - p.analytic_l2).abs() <= 0.05 * p.analytic_l2.abs(),
                    format!("model {k} state {i}: L₂ fit {c} vs {}", p.analytic_l2),
                );
                second += 1;
            }
        }
    }
    o.check(first > 0 && second > 0, "no probes exercised");
    o.note(format!("{first} first-order and {second} tie probes"));
}

fn monte_carlo(o: &mut Outcome) {
    let t = Instant::now();
    let model = spec("eg41");
    let qs = GeneratorMatrix::two_state(5.0 / 12.0, 7.0 / 12.0);
    let dev = GeneratorMatrix::two_state(1.5, 0.2);
    let f = payoff_vector(&model, &qs).unwrap().values;
    let n = 100_000;
    let mut zs = Vec::new();
    for i in 0..2 {
        let e = estimate_payoff(&model, &qs, i, n, 2024 + i as u64).unwrap();
        o.check(
            e.covers(f[i], 3.0),
            format!("F({}) MC {} vs {}", i + 1, e.mean, f[i]),
        );
        zs.push((e.mean - f[i]) / e.std_error);
    }
    let c = concat_payoff_vector(&model, &dev, &qs, 0.2).unwrap()[0];
    let e = estimate_concat_payoff(&model, 0, &dev, &qs, 0.2, n, 2026).unwrap();
    o.check(
        e.covers(c, 3.0),
        format!("concatenated MC {} vs {c}", e.mean),
    );
    zs.push((e.mean - c) / e.std_error);
    let secs = t.elapsed().as_secs_f64();
    o.check(secs <= 30.0, format!("runtime {secs:.1}s"));
    o.note(format!("z-scores {:.2?}, {secs:.2}s", zs));
}

fn resolvent_quadrature(o: &mut Outcome) {
    let mut r = rng(700);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let model = random_model(&mut r, 2 + k % 4, Shape::Cubic);
        let q = random_generator(&mut r, &model);
        let a = payoff_vector(&model, &q).unwrap().values;
        let b = payoff_vector_quadrature(&model, &q).unwrap().values;
        let d = common::max_diff(&a, &b);
        worst = worst.max(d);
        o.check(d <= 1e-8, format!("model {k}: {d:e}"));
    }
    o.note(format!("worst entrywise gap {worst:.1e}"));
}

fn discrete_convergence(o: &mut Outcome) {
    let ex = builtin("eg52").unwrap();
    let model = ex.model.to_model_spec().unwrap();
    for d in [0.1, 0.05, 0.01] {
        let out = discrete_solve(&discretize(&model, d).unwrap(), &SolveConfig::default()).unwrap();
        let (a, b) = eg52_discrete_equilibrium(d);
        match out.candidates.as_slice() {
            [c] => {
                let (x, y) = (c.transition.get(0, 1), c.transition.get(1, 0));
                o.check((x - a).abs() <= 1e-10, format!("α at {d}: {x} vs {a}"));
                o.check((y - b).abs() <= 1e-10, format!("β at {d}: {y} vs {b}"));
                o.check(
                    (x / d - 5.0 / 12.0).abs() <= d,
                    format!("α/δ at {d}: {}", x / d),
                );
            }
            c => o.check(false, format!("{} discrete equilibria at {d}", c.len())),
        }
    }
    let rep = convergence_run(&model, &ex.meshes, &ConvergenceConfig::default()).unwrap();
    match rep.branches.as_slice() {
        [b] => {
            let lim = b.limit.clone().unwrap_or_else(|| b.estimate.clone());
            let (x, y) = ab(&lim);
            let v = b.report.as_ref().map(|r| r.verdict);
            o.check(
                (x - 5.0 / 12.0).abs() <= 1e-8 && (y - 7.0 / 12.0).abs() <= 1e-8,
                format!("limit ({x}, {y})"),
            );
            o.check(v == Some(Verdict::Strong), format!("limit verdict {v:?}"));
            o.note(format!(
                "limit ({x:.12}, {y:.12}) {:?}, {:?}",
                b.status,
                v.map(|v| v.as_str())
            ));
        }
        bs => o.check(false, format!("{} branches", bs.len())),
    }
}

fn weak_not_strong_limit(o: &mut Outcome) {
    let k = 1.0;
    let ex = eg51(k);
    let model = ex.model.to_model_spec().unwrap();
    let dm = discretize(&model, 0.01).unwrap();
    let c = discrete_equilibrium_check(&dm, &TransitionMatrix::identity(2), 1e-7).unwrap();
    o.check(c.equilibrium, "u ∼ (0, 0) rejected at h = 0.01");

    let rep = convergence_run(&model, &ex.meshes, &ConvergenceConfig::default()).unwrap();
    let zero = GeneratorMatrix::zeros(2);
    let branch = rep
        .branches
        .iter()
        .find(|b| b.limit.as_ref().unwrap_or(&b.estimate).max_abs_diff(&zero) <= 1e-9);
    let v = branch.and_then(|b| b.report.as_ref()).map(|r| r.verdict);
    o.check(
        v == Some(Verdict::WeakNotStrong),
        format!("limit verdict {v:?}"),
    );

    let base = Baseline::new(&model, &zero).unwrap();
    let at_eq = lambda_full(&model, 0, &zero, &base).unwrap();
    let dev = GeneratorMatrix::two_state(2.0 * k, 0.0);
    let at_dev = lambda_full(&model, 0, &dev, &base).unwrap();
    o.check(
        (at_eq - 1.5).abs() <= 1e-12,
        format!("Λ(1, Q*) = {at_eq}, want 3/2"),
    );
    let published = 33.0 / 4.0 * k + 1.5;
    o.check(
        (at_dev - published).abs() <= 1e-12,
        format!("Λ(1, Q̂) = {at_dev}, published 33k/4 + 3/2 = {published}"),
    );
    o.note(format!(
        "Λ(1, Q̂) = {at_dev}; k/4 + 3/2 = {} (recomputed from g₁(2k) = −3k/2 − 1)",
        k / 4.0 + 1.5
    ));
}

fn existence(o: &mut Outcome) {
    let mut r = rng(1000);
    let cfg = SolveConfig::default();
    let mut found = 0;
    for k in 0..20 {
        let model = random_model(&mut r, 2 + k % 3, Shape::Concave);
        let out = fixed_point_solve(&model, &cfg).unwrap();
        let ok = out
            .candidates
            .iter()
            .any(|c| weak_check(&model, &c.generator, &cfg.options).unwrap().weak);
        o.check(
            ok,
            format!(
                "model {k}: no weak equilibrium ({} failures)",
                out.failures.len()
            ),
        );
        found += ok as usize;
    }
    o.note(format!("{found}/20 models solved"));
}

type Criterion = (&'static str, fn(&mut Outcome));

fn main() {
    let criteria: [Criterion; 10] = [
        ("eg41 interior equilibrium is strong", interior_strong),
        ("eg42 boundary equilibrium is strong", boundary_strong),
        ("eg43 weak-not-strong and strong candidates", two_candidates),
        (
            "eg43 deviation gain is second order and negative",
            deviation_incentive,
        ),
        ("expansion orders on random models", expansion_orders),
        ("Monte Carlo agrees with resolvent", monte_carlo),
        ("resolvent agrees with quadrature", resolvent_quadrature),
        (
            "eg52 discrete equilibria converge to a strong limit",
            discrete_convergence,
        ),
        (
            "eg51 discrete limit is weak but not strong",
            weak_not_strong_limit,
        ),
        ("weak equilibria exist on random concave models", existence),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let mut o = Outcome::default();
        run(&mut o);
        let status = if o.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        println!("{status} {:>2} {name}", k + 1);
        for n in &o.notes {
            println!("        {n}");
        }
        for f in &o.failures {
            println!("        failed: {f}");
        }
        failed += !o.failures.is_empty() as usize;
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

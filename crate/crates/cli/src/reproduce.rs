use serde_json::{json, Value};
use strongeq::discrete::{
    convergence_run, discrete_equilibrium_check, discrete_solve, discretize, ConvergenceConfig,
    TransitionMatrix,
};
use strongeq::equilibrium::{
    default_eps_grid, expansion_probe, fixed_point_solve, lambda_bar_row, lambda_full,
    strong_check, Baseline, SolveConfig, Verdict,
};
use strongeq::twostate::{eg42_equation, Example, Source, TwoStateModel};
use strongeq::{GeneratorMatrix, ModelSpec};

use crate::commands::{convergence_results, convergence_sidecar, example, solve_config, Output};
use crate::error::{CliError, CliResult};
use crate::report::{Comparison, Sidecar, VerdictComparison};
use crate::Global;

/// Accumulates comparisons for one example run.
struct Ledger<'a> {
    ex: &'a Example,
    comparisons: Vec<Comparison>,
    verdicts: Vec<VerdictComparison>,
}

impl<'a> Ledger<'a> {
    fn new(ex: &'a Example) -> Self {
        Ledger {
            ex,
            comparisons: Vec::new(),
            verdicts: Vec::new(),
        }
    }

    /// Compares against a manifest entry, inheriting its source.
    fn value(&mut self, name: &str, actual: f64, tol: f64) {
        let e = self
            .ex
            .value(name)
            .unwrap_or_else(|| panic!("manifest of {} lacks {name}", self.ex.id));
        self.comparisons
            .push(Comparison::new(name, e.value, actual, tol, e.source));
    }

    fn num(&mut self, name: &str, expected: f64, actual: f64, tol: f64, source: Source) {
        self.comparisons
            .push(Comparison::new(name, expected, actual, tol, source));
    }

    fn verdict(&mut self, name: &str, expected: Verdict, actual: Option<Verdict>, source: Source) {
        self.verdicts.push(VerdictComparison {
            name: name.into(),
            expected: expected.as_str().into(),
            actual: actual.map(|v| v.as_str().into()),
            source,
            pass: actual == Some(expected),
        });
    }

    fn flag(&mut self, name: &str, expected: &str, actual: &str, source: Source) {
        self.verdicts.push(VerdictComparison {
            name: name.into(),
            expected: expected.into(),
            actual: Some(actual.into()),
            source,
            pass: expected == actual,
        });
    }
}

fn ab(q: &GeneratorMatrix) -> (f64, f64) {
    (q.get(0, 1), q.get(1, 0))
}

fn nearest<'a>(
    qs: impl Iterator<Item = &'a GeneratorMatrix>,
    a: f64,
    b: f64,
) -> Option<&'a GeneratorMatrix> {
    let target = GeneratorMatrix::two_state(a, b);
    qs.min_by(|x, y| x.max_abs_diff(&target).total_cmp(&y.max_abs_diff(&target)))
}

/// Continuous solve, then each expected equilibrium is matched to the
/// nearest candidate and classified.
fn continuous(
    led: &mut Ledger,
    model: &ModelSpec,
    cfg: &SolveConfig,
    tols: &[f64],
) -> CliResult<Value> {
    let outcome = fixed_point_solve(model, cfg)?;
    let mut found = Vec::new();
    for c in &outcome.candidates {
        let r = strong_check(model, &c.generator, &cfg.options)?;
        let (a, b) = ab(&c.generator);
        found.push((
            c.generator.clone(),
            r.verdict,
            json!({ "a": a, "b": b, "verdict": r.verdict, "witness": r.witness }),
        ));
    }
    for (k, (e, tol)) in led.ex.equilibria.clone().iter().zip(tols).enumerate() {
        let hit = nearest(found.iter().map(|f| &f.0), e.a, e.b);
        let (a, b) = hit.map(ab).unwrap_or((f64::NAN, f64::NAN));
        let verdict = hit.and_then(|h| found.iter().find(|f| &f.0 == h).map(|f| f.1));
        led.num(&format!("equilibrium[{k}].a"), e.a, a, *tol, e.source);
        led.num(&format!("equilibrium[{k}].b"), e.b, b, *tol, e.source);
        led.verdict(
            &format!("equilibrium[{k}].verdict"),
            e.verdict,
            verdict,
            e.source,
        );
    }
    Ok(json!({
        "candidates": found.into_iter().map(|f| f.2).collect::<Vec<_>>(),
        "failures": outcome.failures.len(),
    }))
}

fn eg41(
    led: &mut Ledger,
    tm: &TwoStateModel,
    model: &ModelSpec,
    cfg: &SolveConfig,
) -> CliResult<Value> {
    let res = continuous(led, model, cfg, &[1e-8])?;
    let (a, b) = (5.0 / 12.0, 7.0 / 12.0);
    led.value("f_gap_at_equilibrium", tm.f_gap(a, b)?, 1e-12);
    led.value("g_gap_at_equilibrium", tm.g_gap(a, b)?, 1e-12);
    Ok(res)
}

fn eg42(led: &mut Ledger, model: &ModelSpec, cfg: &SolveConfig) -> CliResult<Value> {
    let res = continuous(led, model, cfg, &[1e-8])?;
    let a = res["candidates"]
        .as_array()
        .and_then(|c| c.first())
        .and_then(|c| c["a"].as_f64())
        .unwrap_or(f64::NAN);
    led.value("astar", a, 1e-8);
    led.num(
        "equation_residual",
        0.0,
        eg42_equation(a),
        1e-10,
        Source::Derived,
    );
    led.num("astar_in_bracket", 0.595, a, 0.005, Source::Derived);
    Ok(res)
}

fn eg43(led: &mut Ledger, model: &ModelSpec, cfg: &SolveConfig) -> CliResult<Value> {
    let mut res = continuous(led, model, cfg, &[1e-8, 5e-5])?;
    let abar = res["candidates"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|c| Some((c["a"].as_f64()?, c["b"].as_f64()?)))
        .find(|&(_, b)| b.abs() < 1e-9)
        .map_or(f64::NAN, |(a, _)| a);
    led.value("abar", abar, 1e-8);
    led.value("abar_published", abar, 5e-5);

    let qstar = GeneratorMatrix::two_state(5.0 / 12.0, 7.0 / 12.0);
    let base = Baseline::new(model, &qstar)?;
    let slope = led
        .ex
        .value("lambda_bar_slope")
        .map_or(f64::NAN, |v| v.value);
    let icpt = led
        .ex
        .value("lambda_bar_intercept")
        .map_or(f64::NAN, |v| v.value);
    for (name, b) in [
        ("lambda_bar_at_b0", 0.0),
        ("lambda_bar_at_b7_24", 7.0 / 24.0),
    ] {
        let v = lambda_bar_row(model, 1, &[b, -b], &base.g, &base.gamma)?;
        led.num(name, icpt + slope * b, v, 1e-9, Source::Published);
    }
    let b = 7.0 / 12.0;
    led.value(
        "lambda_bar_at_equilibrium",
        lambda_bar_row(model, 1, &[b, -b], &base.g, &base.gamma)?,
        1e-9,
    );
    let dev = GeneratorMatrix::two_state(5.0 / 12.0, 0.0);
    let p = expansion_probe(model, 1, &dev, &qstar, &default_eps_grid())?;
    let expected = led
        .ex
        .value("probe_coefficient")
        .map_or(f64::NAN, |v| v.value);
    led.value(
        "probe_coefficient",
        p.fitted_coefficient.unwrap_or(f64::NAN),
        0.05 * expected.abs(),
    );
    led.num(
        "probe_order",
        2.0,
        p.fitted_order.unwrap_or(f64::NAN),
        0.1,
        Source::Derived,
    );
    res["probe"] = json!({
        "eps": p.eps,
        "differences": p.differences,
        "fitted_order": p.fitted_order,
        "fitted_coefficient": p.fitted_coefficient,
    });
    Ok(res)
}

fn eg51(
    led: &mut Ledger,
    tm: &TwoStateModel,
    model: &ModelSpec,
    cfg: &SolveConfig,
) -> CliResult<(Value, Sidecar)> {
    let k = led.ex.value("k").map_or(1.0, |v| v.value);
    let qstar = GeneratorMatrix::zeros(2);
    let r = strong_check(model, &qstar, &cfg.options)?;
    let e = led.ex.equilibria[0].clone();
    led.verdict(
        "equilibrium[0].verdict",
        e.verdict,
        Some(r.verdict),
        e.source,
    );
    led.value("f_gap_at_equilibrium", tm.f_gap(0.0, 0.0)?, 1e-12);
    let tie = 2.0 * k;
    led.value("tie_rate", tie, 1e-12);
    led.num(
        "gamma1_tie",
        tm.gamma1(0.0, 0.0, 0.0)?,
        tm.gamma1(tie, 0.0, 0.0)?,
        1e-12,
        Source::Published,
    );
    let base = Baseline::new(model, &qstar)?;
    let at_eq = lambda_full(model, 0, &qstar, &base)?;
    let at_dev = lambda_full(model, 0, &GeneratorMatrix::two_state(tie, 0.0), &base)?;
    led.value("lambda_at_equilibrium", at_eq, 1e-12);
    led.value("lambda_at_deviation", at_dev, 1e-12);
    led.value("lambda_at_deviation_published", at_dev, 1e-12);

    let h = led.ex.value("discrete_mesh").map_or(0.01, |v| v.value);
    let c = discrete_equilibrium_check(
        &discretize(model, h)?,
        &TransitionMatrix::identity(2),
        cfg.options.tie_rel,
    )?;
    let state = |ok: bool| if ok { "EQUILIBRIUM" } else { "NOT_EQUILIBRIUM" };
    led.flag(
        "discrete_identity",
        state(true),
        state(c.equilibrium),
        Source::Published,
    );

    let conv = convergence_run(
        model,
        &led.ex.meshes,
        &ConvergenceConfig {
            solve: cfg.clone(),
            ..Default::default()
        },
    )?;
    let limit = conv.branches.iter().min_by(|x, y| {
        let d = |b: &strongeq::discrete::Branch| {
            b.limit.as_ref().unwrap_or(&b.estimate).max_abs_diff(&qstar)
        };
        d(x).total_cmp(&d(y))
    });
    let (la, lb) = limit
        .map(|b| ab(b.limit.as_ref().unwrap_or(&b.estimate)))
        .unwrap_or((f64::NAN, f64::NAN));
    led.num("limit.a", 0.0, la, 1e-6, Source::Published);
    led.num("limit.b", 0.0, lb, 1e-6, Source::Published);
    led.verdict(
        "limit.verdict",
        Verdict::WeakNotStrong,
        limit.and_then(|b| b.report.as_ref().map(|r| r.verdict)),
        Source::Published,
    );
    Ok((
        json!({
            "k": k,
            "verdict": r.verdict,
            "witness": r.witness,
            "lambda_at_equilibrium": at_eq,
            "lambda_at_deviation": at_dev,
            "discrete_check": { "mesh": h, "equilibrium": c.equilibrium, "gaps": c.rows.iter().map(|r| r.gap).collect::<Vec<_>>() },
            "convergence": convergence_results(&conv),
        }),
        convergence_sidecar(2, &conv),
    ))
}

fn eg52(led: &mut Ledger, model: &ModelSpec, cfg: &SolveConfig) -> CliResult<(Value, Sidecar)> {
    let mut per_mesh = Vec::new();
    for &d in &led.ex.meshes.clone() {
        let out = discrete_solve(&discretize(model, d)?, cfg)?;
        let name_a = format!("alpha@{d}");
        let name_b = format!("beta@{d}");
        let ea = led.ex.value(&name_a).map_or(f64::NAN, |v| v.value);
        let eb = led.ex.value(&name_b).map_or(f64::NAN, |v| v.value);
        let hit = out.candidates.iter().min_by(|x, y| {
            let e = |c: &strongeq::discrete::DiscreteCandidate| {
                (c.transition.get(0, 1) - ea)
                    .abs()
                    .max((c.transition.get(1, 0) - eb).abs())
            };
            e(x).total_cmp(&e(y))
        });
        let (a, b) = hit.map_or((f64::NAN, f64::NAN), |c| {
            (c.transition.get(0, 1), c.transition.get(1, 0))
        });
        led.value(&name_a, a, 1e-10);
        led.value(&name_b, b, 1e-10);
        led.num(
            &format!("alpha_over_delta@{d}"),
            5.0 / 12.0,
            a / d,
            d,
            Source::Published,
        );
        per_mesh
            .push(json!({ "delta": d, "alpha": a, "beta": b, "candidates": out.candidates.len() }));
    }
    let conv = convergence_run(
        model,
        &led.ex.meshes,
        &ConvergenceConfig {
            solve: cfg.clone(),
            ..Default::default()
        },
    )?;
    let e = led.ex.equilibria[0].clone();
    let limit = conv.branches.first();
    let (la, lb) = limit
        .map(|b| ab(b.limit.as_ref().unwrap_or(&b.estimate)))
        .unwrap_or((f64::NAN, f64::NAN));
    led.num("limit.a", e.a, la, 1e-8, e.source);
    led.num("limit.b", e.b, lb, 1e-8, e.source);
    led.verdict(
        "limit.verdict",
        e.verdict,
        limit.and_then(|b| b.report.as_ref().map(|r| r.verdict)),
        e.source,
    );
    Ok((
        json!({ "meshes": per_mesh, "convergence": convergence_results(&conv) }),
        convergence_sidecar(2, &conv),
    ))
}

pub fn reproduce(g: &Global, id: &str, k: Option<f64>) -> CliResult<Output> {
    let ex = example(id, k)?;
    let tm = ex.model.clone();
    let model = tm.to_model_spec()?;
    let cfg = solve_config(g, None);
    let mut led = Ledger::new(&ex);
    let mut sidecars = Vec::new();
    let results = match id {
        "eg41" => eg41(&mut led, &tm, &model, &cfg)?,
        "eg42" => eg42(&mut led, &model, &cfg)?,
        "eg43" => eg43(&mut led, &model, &cfg)?,
        "eg51" => {
            let (r, s) = eg51(&mut led, &tm, &model, &cfg)?;
            sidecars.push(s);
            r
        }
        "eg52" => {
            let (r, s) = eg52(&mut led, &model, &cfg)?;
            sidecars.push(s);
            r
        }
        other => return Err(strongeq::Error::UnknownExample(other.into()).into()),
    };
    let total = led.comparisons.len() + led.verdicts.len();
    let failed = led.comparisons.iter().filter(|c| !c.pass).count()
        + led.verdicts.iter().filter(|v| !v.pass).count();
    let mut out = Output::new(
        &model,
        json!({ "example": ex.id, "summary": ex.summary, "manifest": ex.values, "results": results }),
    );
    out.comparisons = led.comparisons;
    out.verdicts = led.verdicts;
    out.sidecars = sidecars;
    if failed > 0 {
        out.failure = Some(CliError::Mismatch { failed, total });
    }
    Ok(out)
}

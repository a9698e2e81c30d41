use serde_json::{json, Value};
use strongeq::config::ModelConfig;
use strongeq::discrete::{
    convergence_run, discrete_equilibrium_check, discrete_solve, discretize, ConvergenceConfig,
    ConvergenceReport,
};
use strongeq::equilibrium::{
    default_eps_grid, expansion_probe, fixed_point_solve, strong_check, weak_check, Selection,
    SolveConfig,
};
use strongeq::montecarlo::{estimate_concat_payoff, estimate_payoff};
use strongeq::payoff::{concat_payoff_vector, derivative_payoff_vector, payoff_vector};
use strongeq::twostate::{builtin, eg51, Example};
use strongeq::{validate_generator, GeneratorMatrix, ModelSpec};

use crate::error::{CliError, CliResult};
use crate::report::{model_digest, Comparison, Sidecar, VerdictComparison};
use crate::{DeviationArgs, Global, ModelArgs, SelectionArg, SolverArgs};

/// Everything a command hands back for the report.
pub struct Output {
    pub digest: String,
    pub results: Value,
    pub comparisons: Vec<Comparison>,
    pub verdicts: Vec<VerdictComparison>,
    pub sidecars: Vec<Sidecar>,
    /// Reported after the report has been written.
    pub failure: Option<CliError>,
}

impl Output {
    pub fn new(model: &ModelSpec, results: Value) -> Self {
        Output {
            digest: model_digest(model),
            results,
            comparisons: Vec::new(),
            verdicts: Vec::new(),
            sidecars: Vec::new(),
            failure: None,
        }
    }
}

pub struct Loaded {
    pub model: ModelSpec,
    pub candidate: Option<GeneratorMatrix>,
    pub deviation: Option<GeneratorMatrix>,
    pub example: Option<Example>,
}

/// Parses "r11,r12;r21,r22" into a generator.
pub fn parse_rows(text: &str, what: &str) -> CliResult<GeneratorMatrix> {
    let rows = text
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| CliError::Usage(format!("--{what}: `{}`: {e}", x.trim())))
                })
                .collect::<CliResult<Vec<f64>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(GeneratorMatrix::from_rows(&rows)?)
}

fn pick(
    rows: &Option<String>,
    ab: &Option<Vec<f64>>,
    what: &str,
) -> CliResult<Option<GeneratorMatrix>> {
    if let Some(r) = rows {
        return parse_rows(r, what).map(Some);
    }
    match ab.as_deref() {
        None => Ok(None),
        Some(&[a, b]) => Ok(Some(GeneratorMatrix::two_state(a, b))),
        Some(v) => Err(CliError::Usage(format!(
            "--{} takes two rates a,b, got {}",
            if what == "q" { "ab" } else { "dev-ab" },
            v.len()
        ))),
    }
}

pub fn example(id: &str, k: Option<f64>) -> CliResult<Example> {
    match (id, k) {
        ("eg51", Some(k)) => {
            if !(k > 0.0 && k.is_finite()) {
                return Err(CliError::Usage(format!("--k {k} must be positive")));
            }
            Ok(eg51(k))
        }
        (_, Some(_)) => Err(CliError::Usage("--k only applies to eg51".into())),
        _ => Ok(builtin(id)?),
    }
}

pub fn load(m: &ModelArgs, dev: Option<&DeviationArgs>) -> CliResult<Loaded> {
    let explicit = pick(&m.q, &m.ab, "q")?;
    let explicit_dev = match dev {
        Some(d) => pick(&d.dev, &d.dev_ab, "dev")?,
        None => None,
    };
    let (model, candidate, deviation, example) = match (&m.config, &m.example) {
        (Some(path), None) => {
            if m.k.is_some() {
                return Err(CliError::Usage("--k only applies to --example eg51".into()));
            }
            let cfg = ModelConfig::load(path)?;
            (cfg.to_model()?, cfg.candidate()?, cfg.deviation()?, None)
        }
        (None, Some(id)) => {
            let ex = example(id, m.k)?;
            let eq = ex
                .equilibria
                .first()
                .map(|e| GeneratorMatrix::two_state(e.a, e.b));
            (ex.model.to_model_spec()?, eq, None, Some(ex))
        }
        _ => {
            return Err(CliError::Usage(
                "give a model file or --example <id>".into(),
            ))
        }
    };
    Ok(Loaded {
        model,
        candidate: explicit.or(candidate),
        deviation: explicit_dev.or(deviation),
        example,
    })
}

fn require(q: Option<GeneratorMatrix>, what: &str) -> CliResult<GeneratorMatrix> {
    q.ok_or_else(|| {
        CliError::Usage(format!(
            "no {what}: pass it on the command line or set `{what}` in the model file"
        ))
    })
}

pub fn solve_config(g: &Global, s: Option<&SolverArgs>) -> SolveConfig {
    let mut cfg = SolveConfig::default();
    if let Some(s) = s {
        cfg.starts = s.starts;
        cfg.damping = s.damping;
        cfg.max_iter = s.max_iter;
        cfg.selection = match s.selection {
            SelectionArg::Nearest => Selection::Nearest,
            SelectionArg::Lexicographic => Selection::Lexicographic,
        };
    }
    if let Some(t) = g.tol {
        cfg.tol = t;
    }
    if let Some(t) = g.tie_rel {
        cfg.options.tie_rel = t;
    }
    cfg
}

fn state_index(model: &ModelSpec, state: usize) -> CliResult<usize> {
    if state == 0 || state > model.n() {
        return Err(CliError::Usage(format!(
            "--state {state} outside 1..={}",
            model.n()
        )));
    }
    Ok(state - 1)
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("results serialize")
}

pub fn eval(m: &ModelArgs, d: &DeviationArgs, eps: Option<f64>) -> CliResult<Output> {
    let l = load(m, Some(d))?;
    let q = require(l.candidate, "candidate")?;
    validate_generator(&l.model, &q).into_result()?;
    let f = payoff_vector(&l.model, &q)?;
    let gv = derivative_payoff_vector(&l.model, &q)?;
    let mut results = json!({
        "candidate": q,
        "payoff_rates": l.model.payoff_rates(&q)?,
        "payoff": f.values,
        "resolvent_residual": f.residual,
        "derivative_payoff": gv.values,
    });
    if let Some(e) = eps {
        let dev = require(l.deviation, "deviation")?;
        validate_generator(&l.model, &dev).into_result()?;
        results["deviation"] = to_value(&dev);
        results["eps"] = json!(e);
        results["concatenated_payoff"] = json!(concat_payoff_vector(&l.model, &dev, &q, e)?);
    }
    Ok(Output::new(&l.model, results))
}

pub fn weak(g: &Global, m: &ModelArgs) -> CliResult<Output> {
    let l = load(m, None)?;
    let q = require(l.candidate, "candidate")?;
    let r = weak_check(&l.model, &q, &solve_config(g, None).options)?;
    Ok(Output::new(&l.model, to_value(&r)))
}

pub fn strong(g: &Global, m: &ModelArgs) -> CliResult<Output> {
    let l = load(m, None)?;
    let q = require(l.candidate, "candidate")?;
    let r = strong_check(&l.model, &q, &solve_config(g, None).options)?;
    Ok(Output::new(&l.model, to_value(&r)))
}

pub fn solve(g: &Global, m: &ModelArgs, s: &SolverArgs) -> CliResult<Output> {
    let l = load(m, None)?;
    let cfg = solve_config(g, Some(s));
    let outcome = fixed_point_solve(&l.model, &cfg)?;
    let classified = outcome
        .candidates
        .iter()
        .map(|c| {
            let r = strong_check(&l.model, &c.generator, &cfg.options)?;
            Ok(json!({
                "generator": c.generator,
                "starts": c.starts,
                "iterations": c.iterations,
                "residual": c.residual,
                "verdict": r.verdict,
                "witness": r.witness,
            }))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut out = Output::new(
        &l.model,
        json!({
            "config": cfg,
            "concave": outcome.concave,
            "candidates": classified,
            "failures": outcome.failures,
        }),
    );
    if outcome.candidates.is_empty() {
        out.failure = Some(CliError::NoConvergence(format!(
            "all {} starts failed",
            outcome.failures.len()
        )));
    }
    Ok(out)
}

pub fn sweep(
    m: &ModelArgs,
    d: &DeviationArgs,
    state: usize,
    grid: Option<Vec<f64>>,
) -> CliResult<Output> {
    let l = load(m, Some(d))?;
    let i = state_index(&l.model, state)?;
    let qstar = require(l.candidate, "candidate")?;
    let dev = require(l.deviation, "deviation")?;
    let grid = grid.unwrap_or_else(default_eps_grid);
    let p = expansion_probe(&l.model, i, &dev, &qstar, &grid)?;
    let order = p.fitted_order.unwrap_or(f64::NAN);
    let rows = p
        .eps
        .iter()
        .zip(&p.differences)
        .map(|(e, v)| vec![*e, *v, order])
        .collect();
    let mut out = Output::new(&l.model, to_value(&p));
    out.sidecars.push(Sidecar {
        name: "sweep.csv",
        header: vec!["eps".into(), "difference".into(), "fitted_order".into()],
        rows,
    });
    Ok(out)
}

pub fn mc(
    g: &Global,
    m: &ModelArgs,
    d: &DeviationArgs,
    state: usize,
    paths: usize,
    eps: Option<f64>,
) -> CliResult<Output> {
    let l = load(m, Some(d))?;
    let i = state_index(&l.model, state)?;
    let q = require(l.candidate, "candidate")?;
    let (est, exact, what) = match eps {
        None => (
            estimate_payoff(&l.model, &q, i, paths, g.seed)?,
            payoff_vector(&l.model, &q)?.values[i],
            "payoff",
        ),
        Some(e) => {
            let dev = require(l.deviation, "deviation")?;
            (
                estimate_concat_payoff(&l.model, i, &dev, &q, e, paths, g.seed)?,
                concat_payoff_vector(&l.model, &dev, &q, e)?[i],
                "concatenated_payoff",
            )
        }
    };
    let z = (est.mean - exact) / est.std_error;
    Ok(Output::new(
        &l.model,
        json!({
            "quantity": what,
            "state": state,
            "eps": eps,
            "estimate": est,
            "resolvent": exact,
            "z_score": z,
            "within_3_se": est.covers(exact, 3.0),
        }),
    ))
}

pub fn discrete(
    g: &Global,
    m: &ModelArgs,
    mesh: f64,
    check: bool,
    s: &SolverArgs,
) -> CliResult<Output> {
    let l = load(m, None)?;
    let cfg = solve_config(g, Some(s));
    let dm = discretize(&l.model, mesh)?;
    if check {
        let q = require(l.candidate, "candidate")?;
        let u = dm.to_transition(&q)?;
        let c = discrete_equilibrium_check(&dm, &u, cfg.options.tie_rel)?;
        return Ok(Output::new(&l.model, json!({ "mesh": mesh, "check": c })));
    }
    let outcome = discrete_solve(&dm, &cfg)?;
    let mut out = Output::new(
        &l.model,
        json!({
            "mesh": mesh,
            "candidates": outcome.candidates,
            "failures": outcome.failures,
        }),
    );
    if outcome.candidates.is_empty() {
        out.failure = Some(CliError::NoConvergence(format!(
            "all {} starts failed at mesh {mesh}",
            outcome.failures.len()
        )));
    }
    Ok(out)
}

/// `delta, branch, a_n, b_n, gap` for two states; every off-diagonal rate otherwise.
pub fn convergence_sidecar(n: usize, r: &ConvergenceReport) -> Sidecar {
    let mut header = vec!["delta".to_string(), "branch".to_string()];
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    if n == 2 {
        header.extend(["a_n".to_string(), "b_n".to_string()]);
    } else {
        header.extend(pairs.iter().map(|(i, j)| format!("q_{}_{}", i + 1, j + 1)));
    }
    header.push("gap".into());
    let mut rows = Vec::new();
    for (b, branch) in r.branches.iter().enumerate() {
        for p in &branch.points {
            let mut row = vec![p.delta, b as f64];
            row.extend(pairs.iter().map(|&(i, j)| p.generator.get(i, j)));
            row.push(p.aux_gap.unwrap_or(f64::NAN));
            rows.push(row);
        }
    }
    Sidecar {
        name: "convergence.csv",
        header,
        rows,
    }
}

pub fn convergence_results(r: &ConvergenceReport) -> Value {
    json!({
        "meshes": r.meshes,
        "failures": r.failures,
        "solutions": r.solutions.iter().map(|s| s.iter().map(|c| &c.generator).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "branches": r.branches.iter().map(|b| json!({
            "status": b.status,
            "estimate": b.estimate,
            "limit": b.limit,
            "polish_distance": b.polish_distance,
            "points": b.points.iter().map(|p| json!({
                "delta": p.delta,
                "transition": p.transition,
                "generator": p.generator,
                "aux": p.aux,
                "aux_gap": p.aux_gap,
            })).collect::<Vec<_>>(),
            "verdict": b.report.as_ref().map(|r| r.verdict),
            "witness": b.report.as_ref().and_then(|r| r.witness.clone()),
        })).collect::<Vec<_>>(),
    })
}

pub fn converge(
    g: &Global,
    m: &ModelArgs,
    meshes: Option<Vec<f64>>,
    s: &SolverArgs,
) -> CliResult<Output> {
    let l = load(m, None)?;
    let meshes = meshes
        .or_else(|| {
            l.example
                .as_ref()
                .map(|e| e.meshes.clone())
                .filter(|v| !v.is_empty())
        })
        .unwrap_or_else(|| vec![0.1, 0.05, 0.02, 0.01]);
    let cfg = ConvergenceConfig {
        solve: solve_config(g, Some(s)),
        ..ConvergenceConfig::default()
    };
    let r = convergence_run(&l.model, &meshes, &cfg)?;
    let mut out = Output::new(&l.model, convergence_results(&r));
    out.sidecars.push(convergence_sidecar(l.model.n(), &r));
    if r.branches.is_empty() {
        out.failure = Some(CliError::NoConvergence(
            "no discrete equilibrium at the finest mesh".into(),
        ));
    }
    Ok(out)
}

//! Weak and strong equilibrium classification.

use serde::{Deserialize, Serialize};

use super::functionals::{
    lambda_bar_row, maximize_gamma_row, representative_rows, Baseline, CoordinateArgmax,
    RowGammaProfile,
};
use super::probe::{expansion_probe, ExpansionProbe};
use super::EquilibriumOptions;
use crate::error::Result;
use crate::model::{feasible_directions, validate_generator, GeneratorMatrix, ModelSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    NotWeak,
    WeakNotStrong,
    Strong,
    WeakInconclusiveStrong,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::NotWeak => "NOT_WEAK",
            Verdict::WeakNotStrong => "WEAK_NOT_STRONG",
            Verdict::Strong => "STRONG",
            Verdict::WeakInconclusiveStrong => "WEAK_INCONCLUSIVE_STRONG",
        }
    }

    pub fn is_weak(&self) -> bool {
        *self != Verdict::NotWeak
    }
}

/// First-order condition along `e_j − e_i` at the candidate row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktEntry {
    pub target: usize,
    /// `∂g_i/∂q_j + F_j − F_i` (right derivative at knots).
    pub slope: f64,
    pub can_increase: bool,
    pub can_decrease: bool,
    pub satisfied: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RowWeakDiagnostics {
    pub state: usize,
    /// `Γ(Q*_i)`.
    pub gamma_star: f64,
    pub max_gamma: f64,
    /// `max Γ − Γ(Q*_i)`, positive when some row does better.
    pub gap: f64,
    pub tie_tol: f64,
    pub weak: bool,
    /// Best row found when the candidate row is beaten.
    pub witness: Option<Vec<f64>>,
    pub kkt: Vec<KktEntry>,
    pub profile: RowGammaProfile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakReport {
    pub candidate: GeneratorMatrix,
    pub weak: bool,
    pub payoff: Vec<f64>,
    pub rows: Vec<RowWeakDiagnostics>,
}

impl WeakReport {
    pub fn first_failure(&self) -> Option<&RowWeakDiagnostics> {
        self.rows.iter().find(|r| !r.weak)
    }
}

/// Row-wise `Γ` dominance test at `qstar`.
pub fn weak_check(
    model: &ModelSpec,
    qstar: &GeneratorMatrix,
    opts: &EquilibriumOptions,
) -> Result<WeakReport> {
    validate_generator(model, qstar).into_result()?;
    let base = Baseline::new(model, qstar)?;
    let mut rows = Vec::with_capacity(model.n());
    for i in 0..model.n() {
        let profile = maximize_gamma_row(model, i, &base.f, opts)?;
        let gstar = base.gamma[i];
        let gap = profile.max - gstar;
        let weak = gap <= profile.tie_tol;
        let witness = (!weak).then(|| profile.nearest(&qstar.row(i)));
        let kkt = kkt_entries(model, i, &qstar.row(i), &base.f.values, profile.tie_tol)?;
        rows.push(RowWeakDiagnostics {
            state: i,
            gamma_star: gstar,
            max_gamma: profile.max,
            gap,
            tie_tol: profile.tie_tol,
            weak,
            witness,
            kkt,
            profile,
        });
    }
    Ok(WeakReport {
        candidate: qstar.clone(),
        weak: rows.iter().all(|r| r.weak),
        payoff: base.f.values.clone(),
        rows,
    })
}

pub(crate) fn kkt_entries(
    model: &ModelSpec,
    i: usize,
    q: &[f64],
    f: &[f64],
    tol: f64,
) -> Result<Vec<KktEntry>> {
    let grad = model.payoff().gradient(i, q)?;
    let dirs = feasible_directions(model.row_set(i), q)?;
    let slack = tol.sqrt().max(1e-6);
    Ok(dirs
        .into_iter()
        .map(|d| {
            let j = d.target;
            let slope = grad[j] + f[j] - f[i];
            let satisfied = !(d.increase && slope > slack) && !(d.decrease && slope < -slack);
            KktEntry {
                target: j,
                slope,
                can_increase: d.increase,
                can_decrease: d.decrease,
                satisfied,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `Λ̄(q) > Λ̄(Q*_i)`: deviating to `q` pays at second order.
    Above,
    Below,
    Equal,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TieEvaluation {
    pub row: Vec<f64>,
    pub lambda_bar: f64,
    pub lambda_bar_star: f64,
    pub relation: Relation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RowClassification {
    pub state: usize,
    pub gamma_star: f64,
    pub max_gamma: f64,
    pub gap: f64,
    pub tie_tol: f64,
    pub argmax: Vec<CoordinateArgmax>,
    pub singleton: bool,
    pub ties: Vec<TieEvaluation>,
    pub kkt: Vec<KktEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    FirstOrder {
        state: usize,
        row: Vec<f64>,
        gamma_gap: f64,
    },
    SecondOrder {
        state: usize,
        row: Vec<f64>,
        lambda_bar: f64,
        lambda_bar_star: f64,
    },
    Sweep {
        state: usize,
        deviation: GeneratorMatrix,
        eps: Vec<f64>,
        differences: Vec<f64>,
    },
}

impl Witness {
    pub fn state(&self) -> usize {
        match self {
            Witness::FirstOrder { state, .. }
            | Witness::SecondOrder { state, .. }
            | Witness::Sweep { state, .. } => *state,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UndecidedPair {
    pub state: usize,
    pub row: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub candidate: GeneratorMatrix,
    pub verdict: Verdict,
    /// Set when `STRONG` rests on ε-sweeps rather than strict dominance alone.
    pub numerically_supported: bool,
    pub payoff: Vec<f64>,
    pub derivative_payoff: Vec<f64>,
    pub rows: Vec<RowClassification>,
    pub witness: Option<Witness>,
    pub undecided: Vec<UndecidedPair>,
    pub probes: Vec<ExpansionProbe>,
    pub tie_rel: f64,
    pub val_tol: f64,
}

/// Replaces coordinates that sit in a point component next to `qstar`'s own
/// value by that value, so a candidate solved to finite accuracy is not
/// reported as tying with itself.
fn snap_to_candidate(profile: &RowGammaProfile, row: &mut [f64], star: &[f64]) {
    for c in &profile.coords {
        let j = c.target;
        let x = star[j];
        for k in &c.components {
            let slack = 1e-6 * (1.0 + x.abs());
            if k.is_point() && (row[j] - k.lo).abs() <= slack && (x - k.lo).abs() <= slack {
                row[j] = x;
            }
        }
    }
    let s: f64 = (0..row.len())
        .filter(|&j| j != profile.state)
        .map(|j| row[j])
        .sum();
    row[profile.state] = -s;
}

fn same_row(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + y.abs()))
}

/// Weak check followed by the second-order tie analysis and, where needed,
/// ε-sweeps on structured deviations.
pub fn strong_check(
    model: &ModelSpec,
    qstar: &GeneratorMatrix,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumReport> {
    let weak = weak_check(model, qstar, opts)?;
    let base = Baseline::new(model, qstar)?;
    let mut report = EquilibriumReport {
        candidate: qstar.clone(),
        verdict: Verdict::NotWeak,
        numerically_supported: false,
        payoff: base.f.values.clone(),
        derivative_payoff: base.g.values.clone(),
        rows: Vec::new(),
        witness: None,
        undecided: Vec::new(),
        probes: Vec::new(),
        tie_rel: opts.tie_rel,
        val_tol: opts.val_tol,
    };
    let classify_rows = |ties: &dyn Fn(&RowWeakDiagnostics) -> Result<Vec<TieEvaluation>>| {
        weak.rows
            .iter()
            .map(|r| {
                Ok(RowClassification {
                    state: r.state,
                    gamma_star: r.gamma_star,
                    max_gamma: r.max_gamma,
                    gap: r.gap,
                    tie_tol: r.tie_tol,
                    argmax: r.profile.coords.clone(),
                    singleton: r.profile.is_singleton(),
                    ties: ties(r)?,
                    kkt: r.kkt.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()
    };

    if let Some(fail) = weak.first_failure() {
        report.rows = classify_rows(&|_| Ok(Vec::new()))?;
        report.witness = Some(Witness::FirstOrder {
            state: fail.state,
            row: fail.witness.clone().unwrap_or_default(),
            gamma_gap: fail.gap,
        });
        return Ok(report);
    }

    let tie_eval = |r: &RowWeakDiagnostics| -> Result<Vec<TieEvaluation>> {
        let i = r.state;
        let star = qstar.row(i);
        let lam_star = lambda_bar_row(model, i, &star, &base.g, &base.gamma)?;
        let mut out: Vec<TieEvaluation> = Vec::new();
        for mut row in representative_rows(&r.profile, Some(&star), opts) {
            snap_to_candidate(&r.profile, &mut row, &star);
            if same_row(&row, &star) || out.iter().any(|t| same_row(&t.row, &row)) {
                continue;
            }
            let lam = lambda_bar_row(model, i, &row, &base.g, &base.gamma)?;
            let relation = if lam > lam_star + opts.val_tol {
                Relation::Above
            } else if lam < lam_star - opts.val_tol {
                Relation::Below
            } else {
                Relation::Equal
            };
            out.push(TieEvaluation {
                row,
                lambda_bar: lam,
                lambda_bar_star: lam_star,
                relation,
            });
        }
        Ok(out)
    };
    report.rows = classify_rows(&tie_eval)?;

    let all_ties: Vec<(usize, &TieEvaluation)> = report
        .rows
        .iter()
        .flat_map(|r| r.ties.iter().map(move |t| (r.state, t)))
        .collect();
    if all_ties.is_empty() {
        report.verdict = Verdict::Strong;
        return Ok(report);
    }

    // Largest second-order gain in the first state that has one.
    let above = report.rows.iter().find_map(|r| {
        r.ties
            .iter()
            .filter(|t| t.relation == Relation::Above)
            .max_by(|a, b| {
                (a.lambda_bar - a.lambda_bar_star).total_cmp(&(b.lambda_bar - b.lambda_bar_star))
            })
            .map(|t| (r.state, t.clone()))
    });
    if let Some((state, t)) = above {
        let dev = qstar.with_row(state, &t.row);
        report
            .probes
            .push(expansion_probe(model, state, &dev, qstar, &opts.eps_grid)?);
        report.witness = Some(Witness::SecondOrder {
            state,
            row: t.row,
            lambda_bar: t.lambda_bar,
            lambda_bar_star: t.lambda_bar_star,
        });
        report.verdict = Verdict::WeakNotStrong;
        return Ok(report);
    }

    let equal: Vec<(usize, Vec<f64>)> = all_ties
        .iter()
        .filter(|(_, t)| t.relation == Relation::Equal)
        .map(|(s, t)| (*s, t.row.clone()))
        .collect();
    if equal.is_empty() {
        // Strict second-order dominance on single-row ties; sweep structured
        // deviations that also move other rows.
        let devs = structured_deviations(qstar, &all_ties, opts.max_cross_probes);
        for (states, dev) in devs {
            for &s in &states {
                let p = expansion_probe(model, s, &dev, qstar, &opts.eps_grid)?;
                let bad = p.negative_at_smallest();
                if bad && p.negative_run_below(opts.val_tol) && report.witness.is_none() {
                    report.witness = Some(Witness::Sweep {
                        state: s,
                        deviation: dev.clone(),
                        eps: p.eps.clone(),
                        differences: p.differences.clone(),
                    });
                } else if bad {
                    report.undecided.push(UndecidedPair {
                        state: s,
                        row: dev.row(s),
                    });
                }
                report.probes.push(p);
            }
        }
        report.verdict = if report.witness.is_some() {
            Verdict::WeakNotStrong
        } else if report.undecided.is_empty() {
            report.numerically_supported = true;
            Verdict::Strong
        } else {
            Verdict::WeakInconclusiveStrong
        };
        return Ok(report);
    }

    for (s, row) in equal {
        let dev = qstar.with_row(s, &row);
        let p = expansion_probe(model, s, &dev, qstar, &opts.eps_grid)?;
        if report.witness.is_none()
            && p.negative_at_smallest()
            && p.negative_run_below(opts.val_tol)
        {
            report.witness = Some(Witness::Sweep {
                state: s,
                deviation: dev,
                eps: p.eps.clone(),
                differences: p.differences.clone(),
            });
        } else {
            report.undecided.push(UndecidedPair { state: s, row });
        }
        report.probes.push(p);
    }
    report.verdict = if report.witness.is_some() {
        Verdict::WeakNotStrong
    } else {
        Verdict::WeakInconclusiveStrong
    };
    Ok(report)
}

/// Single-row tie replacements plus pairs of replacements in distinct rows,
/// each with the states whose rows changed.
fn structured_deviations(
    qstar: &GeneratorMatrix,
    ties: &[(usize, &TieEvaluation)],
    cap: usize,
) -> Vec<(Vec<usize>, GeneratorMatrix)> {
    let mut out = Vec::new();
    for (s, t) in ties {
        out.push((vec![*s], qstar.with_row(*s, &t.row)));
    }
    'pairs: for (a, (s1, t1)) in ties.iter().enumerate() {
        for (s2, t2) in &ties[a + 1..] {
            if s1 == s2 {
                continue;
            }
            if out.len() >= cap {
                break 'pairs;
            }
            let dev = qstar.with_row(*s1, &t1.row).with_row(*s2, &t2.row);
            out.push((vec![*s1, *s2], dev));
        }
    }
    out.truncate(cap);
    out
}

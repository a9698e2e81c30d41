//! Equilibrium check and damped best-response search for discrete models.
//!
//! `V(i, u ⊗₁ u*) = κ(0, i, u_i) + H(u*) · u_i`, so `u*` is an equilibrium
//! exactly when each row `u*_i` maximizes that expression over its box.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::values::{discrete_aux, discrete_values};
use super::{DiscreteModel, TransitionMatrix};
use crate::equilibrium::{
    damped_iteration, halton_starts, kkt_entries, maximize_separable, require_compact, KktEntry,
    RowGammaProfile, SolveConfig, StartFailure,
};
use crate::error::{Error, Result};
use crate::model::GeneratorMatrix;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteRowDiagnostics {
    pub state: usize,
    /// Row objective at `u*_i`, in the rate-scaled units `g_i(q) + q · prices`.
    pub objective: f64,
    pub max: f64,
    pub gap: f64,
    pub tie_tol: f64,
    /// `V(i, u*) − max_u V(i, u ⊗₁ u*)` is `−value_scale · gap`.
    pub value_gap: f64,
    pub equilibrium: bool,
    /// Best deviation row (probabilities) when the row fails.
    pub witness: Option<Vec<f64>>,
    pub kkt: Vec<KktEntry>,
    pub argmax: RowGammaProfile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteCheck {
    pub transition: TransitionMatrix,
    pub generator: GeneratorMatrix,
    pub equilibrium: bool,
    pub values: Vec<f64>,
    pub aux: Vec<f64>,
    pub rows: Vec<DiscreteRowDiagnostics>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn row_profile(
    dm: &DiscreteModel,
    i: usize,
    prices: &[f64],
    tie_rel: f64,
) -> Result<RowGammaProfile> {
    let (max, tie_tol, coords) = maximize_separable(dm.rates(), i, 1.0, prices, tie_rel)?;
    Ok(RowGammaProfile {
        state: i,
        n: dm.n(),
        max,
        tie_tol,
        coords,
        ties: Vec::new(),
    })
}

fn probability_row(dm: &DiscreteModel, i: usize, q: &[f64]) -> Vec<f64> {
    let mut r: Vec<f64> = q.iter().map(|v| v * dm.prob_per_rate()).collect();
    r[i] = 0.0;
    r[i] = 1.0 - r.iter().sum::<f64>();
    r
}

pub fn discrete_equilibrium_check(
    dm: &DiscreteModel,
    ustar: &TransitionMatrix,
    tie_rel: f64,
) -> Result<DiscreteCheck> {
    let generator = dm.to_generator(ustar)?;
    let values = discrete_values(dm, ustar)?;
    let aux = discrete_aux(dm, ustar)?;
    let prices = dm.rate_prices(&aux);
    let mut rows = Vec::with_capacity(dm.n());
    for i in 0..dm.n() {
        let q = dm.rate_row(i, &ustar.row(i))?;
        let argmax = row_profile(dm, i, &prices, tie_rel)?;
        let objective = dm.rates().payoff().value(i, &q)? + dot(&q, &prices);
        let gap = argmax.max - objective;
        let ok = gap <= argmax.tie_tol;
        let witness = (!ok).then(|| probability_row(dm, i, &argmax.nearest(&q)));
        let kkt = kkt_entries(dm.rates(), i, &q, &prices, argmax.tie_tol)?;
        rows.push(DiscreteRowDiagnostics {
            state: i,
            objective,
            max: argmax.max,
            gap,
            tie_tol: argmax.tie_tol,
            value_gap: -dm.value_scale() * gap,
            equilibrium: ok,
            witness,
            kkt,
            argmax,
        });
    }
    Ok(DiscreteCheck {
        transition: ustar.clone(),
        generator,
        equilibrium: rows.iter().all(|r| r.equilibrium),
        values,
        aux,
        rows,
    })
}

/// Best response to `u` in rate units, one selected row per state.
pub fn discrete_best_response(
    dm: &DiscreteModel,
    q: &GeneratorMatrix,
    cfg: &SolveConfig,
) -> Result<GeneratorMatrix> {
    let u = dm.to_transition(q)?;
    let prices = dm.rate_prices(&discrete_aux(dm, &u)?);
    let rows = (0..dm.n())
        .map(|i| {
            let p = row_profile(dm, i, &prices, cfg.options.tie_rel)?;
            Ok(match cfg.selection {
                crate::equilibrium::Selection::Nearest => p.nearest(&q.row(i)),
                crate::equilibrium::Selection::Lexicographic => p.lexicographic_min(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    GeneratorMatrix::from_rows(&rows)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteCandidate {
    pub transition: TransitionMatrix,
    /// `Q^u = (u − I) / p`.
    pub generator: GeneratorMatrix,
    pub starts: Vec<usize>,
    pub iterations: usize,
    pub residual: f64,
    pub check: DiscreteCheck,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteSolveOutcome {
    pub candidates: Vec<DiscreteCandidate>,
    pub failures: Vec<StartFailure>,
}

/// Damped best-response iteration in rate units from the configured starts;
/// limits are re-verified by [`discrete_equilibrium_check`].
pub fn discrete_solve(dm: &DiscreteModel, cfg: &SolveConfig) -> Result<DiscreteSolveOutcome> {
    require_compact(dm.rates())?;
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::Unsupported(format!(
            "damping {} not in (0, 1]",
            cfg.damping
        )));
    }
    let mut starts = cfg.extra_starts.clone();
    starts.extend(halton_starts(dm.rates(), cfg.starts));
    let runs: Vec<_> = starts
        .par_iter()
        .map(|s| damped_iteration(dm.rates(), s, cfg, |q| discrete_best_response(dm, q, cfg)))
        .collect();

    let mut candidates: Vec<DiscreteCandidate> = Vec::new();
    let mut failures = Vec::new();
    for (k, (start, run)) in starts.iter().zip(runs).enumerate() {
        let run = match run {
            Ok(r) => r,
            Err(e @ Error::NoMaximum { .. }) => return Err(e),
            Err(e) => {
                failures.push(StartFailure {
                    start_index: k,
                    start: start.clone(),
                    last: start.clone(),
                    iterations: 0,
                    residual: f64::NAN,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if !run.converged {
            failures.push(StartFailure {
                start_index: k,
                start: start.clone(),
                last: run.last,
                iterations: run.iterations,
                residual: run.residual,
                reason: format!("no convergence in {} iterations", run.iterations),
            });
            continue;
        }
        if let Some(c) = candidates
            .iter_mut()
            .find(|c| c.generator.max_abs_diff(&run.last) <= cfg.cluster_tol)
        {
            c.starts.push(k);
            continue;
        }
        let transition = dm.to_transition(&run.last)?;
        let check = discrete_equilibrium_check(dm, &transition, cfg.options.tie_rel)?;
        if !check.equilibrium {
            failures.push(StartFailure {
                start_index: k,
                start: start.clone(),
                last: run.last,
                iterations: run.iterations,
                residual: run.residual,
                reason: "limit failed the equilibrium check".into(),
            });
            continue;
        }
        candidates.push(DiscreteCandidate {
            transition,
            generator: run.last,
            starts: vec![k],
            iterations: run.iterations,
            residual: run.residual,
            check,
        });
    }
    Ok(DiscreteSolveOutcome {
        candidates,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::super::discretize;
    use super::*;
    use crate::twostate::{builtin, eg51_model};

    #[test]
    fn quartic_example_identity_is_equilibrium() {
        let dm = discretize(&eg51_model(1.0).to_model_spec().unwrap(), 0.01).unwrap();
        let c = discrete_equilibrium_check(&dm, &TransitionMatrix::identity(2), 1e-7).unwrap();
        assert!(
            c.equilibrium,
            "{:?}",
            c.rows.iter().map(|r| r.gap).collect::<Vec<_>>()
        );
    }

    #[test]
    fn zero_payoff_makes_everything_an_equilibrium() {
        let spec = builtin("eg51").unwrap().model;
        let zero = crate::twostate::TwoStateModel::new(
            0.5,
            1.0,
            2.0,
            crate::model::PiecewisePoly::single(0.0, f64::INFINITY, crate::model::Poly::zero()),
            spec.g2.clone(),
            (0.0, 4.0),
            (0.0, 4.0),
        )
        .unwrap();
        let dm = discretize(&zero.to_model_spec().unwrap(), 0.1).unwrap();
        for (a, b) in [(0.0, 0.0), (0.1, 0.3), (0.4, 0.4)] {
            let u = TransitionMatrix::two_state(a, b).unwrap();
            assert!(
                discrete_equilibrium_check(&dm, &u, 1e-7)
                    .unwrap()
                    .equilibrium
            );
        }
    }
}

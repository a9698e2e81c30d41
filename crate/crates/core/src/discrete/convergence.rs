//! Mesh refinement: solve each discretization, follow the resulting
//! generators `Qⁿ` and classify their limit as a continuous-time candidate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::check::{discrete_solve, DiscreteCandidate};
use super::{discretize, TransitionMatrix};
use crate::equilibrium::{fixed_point_solve, strong_check, EquilibriumReport, SolveConfig};
use crate::error::{Error, Result};
use crate::model::{GeneratorMatrix, ModelSpec};
use crate::payoff::payoff_vector;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub solve: SolveConfig,
    /// Successive `Qⁿ` closer than this over the last three meshes count as converged.
    pub cauchy_tol: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            solve: SolveConfig::default(),
            cauchy_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshPoint {
    pub delta: f64,
    pub transition: TransitionMatrix,
    pub generator: GeneratorMatrix,
    pub aux: Vec<f64>,
    /// `max_i |Hⁿ_i(uⁿ) − F_i(Q*)|` against the branch limit.
    pub aux_gap: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitStatus {
    /// The last three iterates agree within the Cauchy tolerance.
    Cauchy,
    /// Successive differences shrink; the limit is estimated by extrapolation in `δ`.
    Extrapolated,
    /// Successive differences do not shrink.
    Divergent,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Branch {
    /// Coarsest mesh first.
    pub points: Vec<MeshPoint>,
    pub status: LimitStatus,
    /// Finest iterate (Cauchy) or the `δ → 0` extrapolant.
    pub estimate: GeneratorMatrix,
    /// Continuous fixed point reached from `estimate`, if any.
    pub limit: Option<GeneratorMatrix>,
    pub polish_distance: Option<f64>,
    pub report: Option<EquilibriumReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Decreasing mesh sizes.
    pub meshes: Vec<f64>,
    /// Discrete equilibria found at each mesh.
    pub solutions: Vec<Vec<DiscreteCandidate>>,
    /// Start failures at each mesh.
    pub failures: Vec<usize>,
    pub branches: Vec<Branch>,
}

fn check_meshes(meshes: &[f64]) -> Result<()> {
    if meshes.len() < 2 {
        return Err(Error::Unsupported("at least two meshes are needed".into()));
    }
    if meshes.iter().any(|&d| !(d > 0.0 && d.is_finite()))
        || meshes.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::Unsupported(
            "meshes must be positive and strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// Neville evaluation at `δ = 0` of the interpolant through `(δ_k, y_k)`.
fn extrapolate(x: &[f64], y: &[f64]) -> f64 {
    let mut p = y.to_vec();
    let k = p.len();
    for lvl in 1..k {
        for a in 0..k - lvl {
            let b = a + lvl;
            p[a] = (x[b] * p[a] - x[a] * p[a + 1]) / (x[b] - x[a]);
        }
    }
    p[0]
}

fn estimate_limit(
    model: &ModelSpec,
    pts: &[MeshPoint],
    cauchy_tol: f64,
) -> Result<(LimitStatus, GeneratorMatrix)> {
    let m = pts.len();
    let last = &pts[m - 1].generator;
    let tail = &pts[m.saturating_sub(3)..];
    let diffs: Vec<f64> = tail
        .windows(2)
        .map(|w| w[0].generator.max_abs_diff(&w[1].generator))
        .collect();
    if tail.len() >= 3 && diffs.iter().all(|&d| d <= cauchy_tol) {
        return Ok((LimitStatus::Cauchy, last.clone()));
    }
    // Differences per unit of mesh change should not grow as δ shrinks.
    let rates: Vec<f64> = tail
        .windows(2)
        .zip(&diffs)
        .map(|(w, d)| d / (w[0].delta - w[1].delta))
        .collect();
    if rates.len() == 2 && rates[1] > 2.0 * rates[0] + cauchy_tol {
        return Ok((LimitStatus::Divergent, last.clone()));
    }
    let x: Vec<f64> = tail.iter().map(|p| p.delta).collect();
    let n = model.n();
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                let y: Vec<f64> = tail.iter().map(|p| p.generator.get(i, j)).collect();
                *v = extrapolate(&x, &y);
            }
        }
    }
    let mut q = GeneratorMatrix::from_off_diagonal(&rows)?;
    for i in 0..n {
        let r = model.row_set(i).project(&q.row(i));
        q.set_row(i, &r);
    }
    Ok((LimitStatus::Extrapolated, q))
}

/// Solves the discretization at every mesh, groups the equilibria into
/// branches ending at each equilibrium of the finest mesh, estimates each
/// branch's limit, polishes it with the continuous solver and classifies it.
pub fn convergence_run(
    model: &ModelSpec,
    meshes: &[f64],
    cfg: &ConvergenceConfig,
) -> Result<ConvergenceReport> {
    check_meshes(meshes)?;
    let outcomes = meshes
        .par_iter()
        .map(|&d| discrete_solve(&discretize(model, d)?, &cfg.solve))
        .collect::<Result<Vec<_>>>()?;
    let failures = outcomes.iter().map(|o| o.failures.len()).collect();
    let solutions: Vec<Vec<DiscreteCandidate>> =
        outcomes.into_iter().map(|o| o.candidates).collect();

    let point = |k: usize, c: &DiscreteCandidate| MeshPoint {
        delta: meshes[k],
        transition: c.transition.clone(),
        generator: c.generator.clone(),
        aux: c.check.aux.clone(),
        aux_gap: None,
    };
    let finest = solutions.len() - 1;
    let mut branches = Vec::new();
    for end in &solutions[finest] {
        let mut pts = vec![point(finest, end)];
        let mut anchor = end.generator.clone();
        for k in (0..finest).rev() {
            let Some(c) = solutions[k].iter().min_by(|a, b| {
                a.generator
                    .max_abs_diff(&anchor)
                    .total_cmp(&b.generator.max_abs_diff(&anchor))
            }) else {
                break;
            };
            anchor = c.generator.clone();
            pts.push(point(k, c));
        }
        pts.reverse();
        let (status, estimate) = estimate_limit(model, &pts, cfg.cauchy_tol)?;
        let mut polish_cfg = cfg.solve.clone();
        polish_cfg.starts = 0;
        polish_cfg.extra_starts = vec![estimate.clone()];
        let polished = fixed_point_solve(model, &polish_cfg)?;
        let limit = polished.candidates.into_iter().next().map(|c| c.generator);
        let target = limit.clone().unwrap_or_else(|| estimate.clone());
        let f = payoff_vector(model, &target)?;
        for p in &mut pts {
            p.aux_gap = Some(
                p.aux
                    .iter()
                    .zip(&f.values)
                    .map(|(h, f)| (h - f).abs())
                    .fold(0.0, f64::max),
            );
        }
        let report = match status {
            LimitStatus::Divergent => None,
            _ => Some(strong_check(model, &target, &cfg.solve.options)?),
        };
        branches.push(Branch {
            points: pts,
            status,
            polish_distance: limit.as_ref().map(|l| l.max_abs_diff(&estimate)),
            estimate,
            limit,
            report,
        });
    }
    Ok(ConvergenceReport {
        meshes: meshes.to_vec(),
        solutions,
        failures,
        branches,
    })
}

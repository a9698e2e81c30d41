//! Best-response map and damped fixed-point search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classify::{weak_check, WeakReport};
use super::functionals::{maximize_gamma_row, RowGammaProfile};
use super::EquilibriumOptions;
use crate::error::{Error, Result};
use crate::model::{GeneratorMatrix, ModelSpec};
use crate::payoff::payoff_vector;

/// How a single generator is picked from a set-valued best response.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Argmax row closest to the current row.
    #[default]
    Nearest,
    /// Smallest row in lexicographic order.
    Lexicographic,
}

/// `Φ(Q)`: per row, the argmax set of `Γ` against `F(Q)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BestResponse {
    pub rows: Vec<RowGammaProfile>,
}

impl BestResponse {
    pub fn is_singleton(&self) -> bool {
        self.rows.iter().all(|r| r.is_singleton())
    }

    pub fn select(&self, how: Selection, current: &GeneratorMatrix) -> GeneratorMatrix {
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|p| match how {
                Selection::Nearest => p.nearest(&current.row(p.state)),
                Selection::Lexicographic => p.lexicographic_min(),
            })
            .collect();
        GeneratorMatrix::from_rows(&rows).expect("square by construction")
    }

    /// Whether `q` is itself a best response (each row in its argmax set).
    pub fn contains(&self, q: &GeneratorMatrix, slack: f64) -> bool {
        self.rows.iter().all(|p| p.contains(&q.row(p.state), slack))
    }
}

pub fn best_response(
    model: &ModelSpec,
    q: &GeneratorMatrix,
    opts: &EquilibriumOptions,
) -> Result<BestResponse> {
    require_compact(model)?;
    let f = payoff_vector(model, q)?;
    let rows = (0..model.n())
        .map(|i| maximize_gamma_row(model, i, &f, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(BestResponse { rows })
}

pub(crate) fn require_compact(model: &ModelSpec) -> Result<()> {
    match (0..model.n()).find(|&i| !model.row_set(i).is_bounded()) {
        Some(state) => Err(Error::UnboundedBox { state }),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveConfig {
    pub starts: usize,
    pub damping: f64,
    pub max_iter: usize,
    /// Stop when `‖select(Φ(Q)) − Q‖_max ≤ tol`.
    pub tol: f64,
    pub selection: Selection,
    /// Limits closer than this (max-norm) are reported once.
    pub cluster_tol: f64,
    /// Starting points tried before the quasi-random ones.
    #[serde(skip)]
    pub extra_starts: Vec<GeneratorMatrix>,
    pub options: EquilibriumOptions,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            starts: 8,
            damping: 0.5,
            max_iter: 5000,
            tol: 1e-12,
            selection: Selection::Nearest,
            cluster_tol: 1e-6,
            extra_starts: Vec::new(),
            options: EquilibriumOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolvedCandidate {
    pub generator: GeneratorMatrix,
    /// Indices of the starts that reached this limit.
    pub starts: Vec<usize>,
    pub iterations: usize,
    pub residual: f64,
    pub weak: WeakReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StartFailure {
    pub start_index: usize,
    pub start: GeneratorMatrix,
    pub last: GeneratorMatrix,
    pub iterations: usize,
    pub residual: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub candidates: Vec<SolvedCandidate>,
    pub failures: Vec<StartFailure>,
    pub concave: bool,
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        !self.candidates.is_empty()
    }
}

/// Radical inverse of `k` in base `b`.
fn halton(mut k: usize, b: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while k > 0 {
        f /= b as f64;
        r += f * (k % b) as f64;
        k /= b;
    }
    r
}

const PRIMES: [usize; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Quasi-random starting generators inside the boxes.
pub fn halton_starts(model: &ModelSpec, count: usize) -> Vec<GeneratorMatrix> {
    let n = model.n();
    (1..=count)
        .map(|k| {
            let mut d = 0;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let set = model.row_set(i);
                    (0..n)
                        .map(|j| {
                            if j == i {
                                return 0.0;
                            }
                            let u = halton(k, PRIMES[d % PRIMES.len()]);
                            d += 1;
                            set.lo(j) + u * (set.hi(j) - set.lo(j))
                        })
                        .collect()
                })
                .collect();
            GeneratorMatrix::from_off_diagonal(&rows).expect("square by construction")
        })
        .collect()
}

pub(crate) struct Run {
    pub last: GeneratorMatrix,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn iterate(model: &ModelSpec, start: &GeneratorMatrix, cfg: &SolveConfig) -> Result<Run> {
    damped_iteration(model, start, cfg, |q| {
        Ok(best_response(model, q, &cfg.options)?.select(cfg.selection, q))
    })
}

/// `Q ← (1−θ) Q + θ respond(Q)` inside the boxes of `model`, halving `θ`
/// whenever the residual stalls for 25 steps.
pub(crate) fn damped_iteration(
    model: &ModelSpec,
    start: &GeneratorMatrix,
    cfg: &SolveConfig,
    respond: impl Fn(&GeneratorMatrix) -> Result<GeneratorMatrix>,
) -> Result<Run> {
    let mut q = start.clone();
    let mut theta = cfg.damping;
    let mut best = f64::INFINITY;
    let mut stalled = 0usize;
    let mut residual = f64::INFINITY;
    for it in 0..cfg.max_iter {
        let target = respond(&q)?;
        residual = target.max_abs_diff(&q);
        if residual <= cfg.tol {
            // The response itself sits exactly on any active bound.
            return Ok(Run {
                last: target,
                iterations: it,
                residual,
                converged: true,
            });
        }
        if residual < 0.999 * best {
            best = residual;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 25 && theta > 1.0 / 1024.0 {
                theta *= 0.5;
                stalled = 0;
            }
        }
        let mut next = GeneratorMatrix::from_rows(
            &(0..model.n())
                .map(|i| {
                    let (a, b) = (q.row(i), target.row(i));
                    a.iter()
                        .zip(&b)
                        .map(|(x, y)| (1.0 - theta) * x + theta * y)
                        .collect()
                })
                .collect::<Vec<Vec<f64>>>(),
        )?;
        next.fix_diagonal();
        // Convex combinations stay in the box; clamp away rounding.
        for i in 0..model.n() {
            let r = model.row_set(i).project(&next.row(i));
            next.set_row(i, &r);
        }
        q = next;
    }
    Ok(Run {
        last: q,
        iterations: cfg.max_iter,
        residual,
        converged: false,
    })
}

/// Damped best-response iteration `Q ← (1−θ) Q + θ select(Φ(Q))` from
/// several starts; every limit is re-verified by [`weak_check`].
pub fn fixed_point_solve(model: &ModelSpec, cfg: &SolveConfig) -> Result<SolveOutcome> {
    require_compact(model)?;
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::Unsupported(format!(
            "damping {} not in (0, 1]",
            cfg.damping
        )));
    }
    let mut starts = cfg.extra_starts.clone();
    starts.extend(halton_starts(model, cfg.starts));
    let runs: Vec<Result<Run>> = starts.par_iter().map(|s| iterate(model, s, cfg)).collect();

    let mut candidates: Vec<SolvedCandidate> = Vec::new();
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
        let weak = weak_check(model, &run.last, &cfg.options)?;
        if !weak.weak {
            failures.push(StartFailure {
                start_index: k,
                start: start.clone(),
                last: run.last,
                iterations: run.iterations,
                residual: run.residual,
                reason: "limit failed the weak check".into(),
            });
            continue;
        }
        candidates.push(SolvedCandidate {
            generator: run.last,
            starts: vec![k],
            iterations: run.iterations,
            residual: run.residual,
            weak,
        });
    }
    Ok(SolveOutcome {
        candidates,
        failures,
        concave: model.is_concave(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_base_two() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
        assert!((halton(1, 3) - 1.0 / 3.0).abs() < 1e-16);
    }
}

//! First- and second-order expansion functionals and row-wise maximization.

use serde::{Deserialize, Serialize};

use super::rowopt::{select_ties, Objective1d, TieComponent};
use super::EquilibriumOptions;
use crate::error::{Error, Result};
use crate::model::{GeneratorMatrix, ModelSpec};
use crate::payoff::{
    derivative_payoff_vector, payoff_vector, DerivativePayoffVector, PayoffVector,
};

/// Quantities evaluated once at a candidate `Q*`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Baseline {
    pub candidate: GeneratorMatrix,
    pub f: PayoffVector,
    pub g: DerivativePayoffVector,
    /// `Γ(Q*_j)` for every state `j`.
    pub gamma: Vec<f64>,
    /// `δ'(0)`.
    pub dprime0: f64,
}

impl Baseline {
    pub fn new(model: &ModelSpec, qstar: &GeneratorMatrix) -> Result<Self> {
        let f = payoff_vector(model, qstar)?;
        let g = derivative_payoff_vector(model, qstar)?;
        let gamma = (0..model.n())
            .map(|j| gamma_row(model, j, &qstar.row(j), &f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Baseline {
            candidate: qstar.clone(),
            f,
            g,
            gamma,
            dprime0: model.discount().derivative(0.0),
        })
    }

    /// `2 G(Q*) + Γ*`, the price vector of the second-order functional.
    pub fn second_order_prices(&self) -> Vec<f64> {
        self.g
            .values
            .iter()
            .zip(&self.gamma)
            .map(|(g, c)| 2.0 * g + c)
            .collect()
    }
}

pub(crate) fn check_row(model: &ModelSpec, i: usize, q: &[f64]) -> Result<()> {
    if i >= model.n() || q.len() != model.n() {
        return Err(Error::Dimension {
            expected: model.n(),
            found: q.len(),
        });
    }
    let scale = 1.0 + q.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let v = model
        .row_set(i)
        .violations(q, model.tolerances().row_sum * scale);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InfeasibleRow {
            state: i,
            reason: v.join("; "),
        })
    }
}

fn dot(q: &[f64], v: &[f64]) -> f64 {
    q.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `Γ(q) = g_i(q) + q · F(Q*)`.
pub fn gamma_row(model: &ModelSpec, i: usize, q: &[f64], fstar: &PayoffVector) -> Result<f64> {
    check_row(model, i, q)?;
    Ok(model.payoff().value(i, q)? + dot(q, &fstar.values))
}

/// Per-row second-order functional `δ'(0) g_i(q) + q · (2 G(Q*) + Γ*)`.
pub fn lambda_bar_row(
    model: &ModelSpec,
    i: usize,
    q: &[f64],
    gstar: &DerivativePayoffVector,
    gamma_star: &[f64],
) -> Result<f64> {
    check_row(model, i, q)?;
    let w: Vec<f64> = gstar
        .values
        .iter()
        .zip(gamma_star)
        .map(|(g, c)| 2.0 * g + c)
        .collect();
    Ok(model.discount().derivative(0.0) * model.payoff().value(i, q)? + dot(q, &w))
}

/// Full second-order coefficient `Λ(i, Q) = δ'(0) g_i(Q_i) + Q_i · (2 G(Q*) + Γ(Q))`,
/// where `Γ(Q)_j` is the first-order functional of row `Q_j` against `F(Q*)`.
pub fn lambda_full(
    model: &ModelSpec,
    i: usize,
    q: &GeneratorMatrix,
    base: &Baseline,
) -> Result<f64> {
    let gamma_q = (0..model.n())
        .map(|j| gamma_row(model, j, &q.row(j), &base.f))
        .collect::<Result<Vec<_>>>()?;
    let row = q.row(i);
    let w: Vec<f64> = base
        .g
        .values
        .iter()
        .zip(&gamma_q)
        .map(|(g, c)| 2.0 * g + c)
        .collect();
    Ok(base.dprime0 * model.payoff().value(i, &row)? + dot(&row, &w))
}

/// Tie set of one off-diagonal coordinate of a row objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateArgmax {
    pub target: usize,
    pub max: f64,
    pub components: Vec<TieComponent>,
}

impl CoordinateArgmax {
    fn nearest(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| x.clamp(c.lo, c.hi))
            .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
            .unwrap_or(x)
    }
}

/// Maximum and argmax structure of `Γ` over one admissible row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowGammaProfile {
    pub state: usize,
    pub n: usize,
    pub max: f64,
    pub tie_tol: f64,
    pub coords: Vec<CoordinateArgmax>,
    /// Representative argmax rows with their `Γ` values.
    pub ties: Vec<(Vec<f64>, f64)>,
}

impl RowGammaProfile {
    /// The argmax is a single row.
    pub fn is_singleton(&self) -> bool {
        self.coords
            .iter()
            .all(|c| c.components.len() == 1 && c.components[0].is_point())
    }

    /// Some coordinate's argmax contains an interval.
    pub fn is_flat(&self) -> bool {
        self.coords
            .iter()
            .any(|c| c.components.iter().any(|k| k.flat))
    }

    fn assemble(&self, off: impl Fn(usize, &CoordinateArgmax) -> f64) -> Vec<f64> {
        let mut r = vec![0.0; self.n];
        let mut s = 0.0;
        for (k, c) in self.coords.iter().enumerate() {
            r[c.target] = off(k, c);
            s += r[c.target];
        }
        r[self.state] = -s;
        r
    }

    /// Argmax row closest (coordinate-wise) to `q`.
    pub fn nearest(&self, q: &[f64]) -> Vec<f64> {
        self.assemble(|_, c| c.nearest(q[c.target]))
    }

    /// Lexicographically smallest argmax row.
    pub fn lexicographic_min(&self) -> Vec<f64> {
        self.assemble(|_, c| c.components[0].lo)
    }

    /// Whether every off-diagonal entry of `q` lies in its tie set.
    pub fn contains(&self, q: &[f64], slack: f64) -> bool {
        self.coords
            .iter()
            .all(|c| c.components.iter().any(|k| k.contains(q[c.target], slack)))
    }

    /// Per-coordinate representative values (endpoints, midpoints, samples).
    pub fn coordinate_representatives(&self, samples: usize) -> Vec<Vec<f64>> {
        self.coords
            .iter()
            .map(|c| {
                c.components
                    .iter()
                    .flat_map(|k| k.representatives(samples))
                    .collect()
            })
            .collect()
    }
}

/// Maximizes `scale · g_i(q) + q · prices` over the box of row `i`, returning
/// the per-coordinate tie sets. Used for `Γ` (scale 1, prices `F(Q*)`) and
/// for discrete-time rows.
pub(crate) fn maximize_separable(
    model: &ModelSpec,
    i: usize,
    scale: f64,
    prices: &[f64],
    tie_rel: f64,
) -> Result<(f64, f64, Vec<CoordinateArgmax>)> {
    let set = model.row_set(i);
    let row = model.payoff().row(i);
    let targets: Vec<usize> = set.targets().collect();
    let objs: Vec<Objective1d> = targets
        .iter()
        .map(|&j| Objective1d {
            poly: row.term(j),
            scale,
            price: prices[j] - prices[i],
            lo: set.lo(j),
            hi: set.hi(j),
        })
        .collect();
    // First pass fixes the maximum, second pass the tie tolerance.
    let mut total = scale * row.constant;
    for (o, &j) in objs.iter().zip(&targets) {
        let c = o.candidates(0.0, i, j)?;
        total += select_ties(&c, 0.0).0;
    }
    let tau = tie_rel * (1.0 + total.abs());
    let per = tau / targets.len().max(1) as f64;
    let mut coords = Vec::with_capacity(targets.len());
    let mut max = scale * row.constant;
    for (o, &j) in objs.iter().zip(&targets) {
        let c = o.candidates(per, i, j)?;
        let (m, components) = select_ties(&c, per);
        max += m;
        coords.push(CoordinateArgmax {
            target: j,
            max: m,
            components,
        });
    }
    Ok((max, tau, coords))
}

/// Global maximum and argmax set of `Γ` over row `i`'s box.
pub fn maximize_gamma_row(
    model: &ModelSpec,
    i: usize,
    fstar: &PayoffVector,
    opts: &EquilibriumOptions,
) -> Result<RowGammaProfile> {
    let (max, tie_tol, coords) = maximize_separable(model, i, 1.0, &fstar.values, opts.tie_rel)?;
    // Γ(q) = c_i + Σ_{j≠i} [p_ij(q_j) + q_j (F_j − F_i)] after eliminating q_ii.
    let mut profile = RowGammaProfile {
        state: i,
        n: model.n(),
        max,
        tie_tol,
        coords,
        ties: Vec::new(),
    };
    let reps = representative_rows(&profile, None, opts);
    profile.ties = reps
        .into_iter()
        .map(|r| {
            let v = gamma_row(model, i, &r, fstar)?;
            Ok((r, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(profile)
}

/// Representative argmax rows: full product when small, otherwise one
/// coordinate varied at a time around `anchor` (or the lexicographic minimum).
pub(crate) fn representative_rows(
    profile: &RowGammaProfile,
    anchor: Option<&[f64]>,
    opts: &EquilibriumOptions,
) -> Vec<Vec<f64>> {
    let reps = profile.coordinate_representatives(opts.tie_samples);
    let base: Vec<f64> = match anchor {
        Some(a) => profile.nearest(a),
        None => profile.lexicographic_min(),
    };
    let size: usize = reps.iter().map(|r| r.len()).product();
    let mut rows = Vec::new();
    let finish = |mut r: Vec<f64>| {
        let s: f64 = (0..r.len())
            .filter(|&j| j != profile.state)
            .map(|j| r[j])
            .sum();
        r[profile.state] = -s;
        r
    };
    if size <= opts.max_product {
        let mut idx = vec![0usize; reps.len()];
        loop {
            let mut r = base.clone();
            for (k, c) in profile.coords.iter().enumerate() {
                r[c.target] = reps[k][idx[k]];
            }
            rows.push(finish(r));
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return rows;
                }
                idx[k] += 1;
                if idx[k] < reps[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
    rows.push(base.clone());
    for (k, c) in profile.coords.iter().enumerate() {
        for &v in &reps[k] {
            if v != base[c.target] {
                let mut r = base.clone();
                r[c.target] = v;
                rows.push(finish(r));
            }
        }
    }
    rows
}

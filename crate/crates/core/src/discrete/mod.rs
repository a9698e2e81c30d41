//! Discrete-time counterpart: transition-matrix controls, values `V` and `H`,
//! equilibrium checks, and the mesh-refinement experiment linking discrete
//! equilibria to continuous ones.
//!
//! A [`DiscreteModel`] keeps its payoff and boxes in rate units. A transition
//! row `u_i` corresponds to the rate row `q_j = u_ij / p` (`j ≠ i`), where `p`
//! is the probability per unit rate (the mesh `δ` for a discretized model), and
//! the per-period payoff is `κ(t, i, u_i) = δ(t·step) · value_scale · g_i(q)`.

mod check;
mod convergence;
mod values;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{GeneratorMatrix, ModelSpec};

pub use check::{
    discrete_best_response, discrete_equilibrium_check, discrete_solve, DiscreteCandidate,
    DiscreteCheck, DiscreteRowDiagnostics, DiscreteSolveOutcome,
};
pub use convergence::{
    convergence_run, Branch, ConvergenceConfig, ConvergenceReport, LimitStatus, MeshPoint,
};
pub use values::{
    concat_value, concat_value_series, discrete_aux, discrete_value, discrete_values,
    discrete_values_series, truncation_horizon, SeriesValues,
};

/// Row-sum tolerance for transition matrices.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Row-stochastic matrix `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix(DMatrix<f64>);

impl TransitionMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Dimension {
                expected: 1,
                found: 0,
            });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                found: r.len(),
            });
        }
        for (i, r) in rows.iter().enumerate() {
            if let Some(j) = r.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InfeasibleRow {
                    state: i,
                    reason: format!("u[{i}][{j}] = {} is not a probability", r[j]),
                });
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InfeasibleRow {
                    state: i,
                    reason: format!("row sums to {s}"),
                });
            }
        }
        Ok(TransitionMatrix(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }

    pub fn identity(n: usize) -> Self {
        TransitionMatrix(DMatrix::identity(n, n))
    }

    /// `[[1−α, α], [β, 1−β]]`.
    pub fn two_state(alpha: f64, beta: f64) -> Result<Self> {
        Self::from_rows(&[vec![1.0 - alpha, alpha], vec![beta, 1.0 - beta]])
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.row(i)).collect()
    }

    pub fn max_abs_diff(&self, other: &TransitionMatrix) -> f64 {
        (&self.0 - &other.0).amax()
    }
}

impl Serialize for TransitionMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for TransitionMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        TransitionMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug)]
pub struct DiscreteModel {
    rates: ModelSpec,
    step: f64,
    value_scale: f64,
    prob_per_rate: f64,
    mesh: Option<f64>,
}

impl DiscreteModel {
    /// `rates` carries the payoff and boxes in rate units. Every box point must
    /// map to a probability row, i.e. `Σ_j hi_ij · prob_per_rate ≤ 1`.
    pub fn new(rates: ModelSpec, step: f64, value_scale: f64, prob_per_rate: f64) -> Result<Self> {
        for (name, v) in [
            ("step", step),
            ("value_scale", value_scale),
            ("prob_per_rate", prob_per_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::model(name, "must be positive and finite"));
            }
        }
        for i in 0..rates.n() {
            let set = rates.row_set(i);
            let exit: f64 = set.targets().map(|j| set.hi(j)).sum();
            let mass = exit * prob_per_rate;
            if mass.is_nan() || mass > 1.0 + ROW_SUM_TOL {
                return Err(Error::MeshTooCoarse {
                    mesh: prob_per_rate,
                    state: i,
                });
            }
        }
        Ok(DiscreteModel {
            rates,
            step,
            value_scale,
            prob_per_rate,
            mesh: None,
        })
    }

    pub fn n(&self) -> usize {
        self.rates.n()
    }

    /// Payoff and boxes in rate units.
    pub fn rates(&self) -> &ModelSpec {
        &self.rates
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn value_scale(&self) -> f64 {
        self.value_scale
    }

    pub fn prob_per_rate(&self) -> f64 {
        self.prob_per_rate
    }

    /// The mesh `δ` when built by [`discretize`].
    pub fn mesh(&self) -> Option<f64> {
        self.mesh
    }

    /// `δ_d(t) = δ(t · step)`.
    pub fn discount_at(&self, t: usize) -> f64 {
        self.rates.discount().value(t as f64 * self.step)
    }

    /// `u = I + p Q` with the diagonal set from the off-diagonals.
    pub fn to_transition(&self, q: &GeneratorMatrix) -> Result<TransitionMatrix> {
        let n = self.n();
        if q.n() != n {
            return Err(Error::Dimension {
                expected: n,
                found: q.n(),
            });
        }
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r: Vec<f64> = (0..n)
                    .map(|j| {
                        if j == i {
                            0.0
                        } else {
                            q.get(i, j) * self.prob_per_rate
                        }
                    })
                    .collect();
                r[i] = 1.0 - r.iter().sum::<f64>();
                r
            })
            .collect();
        TransitionMatrix::from_rows(&rows)
    }

    /// `Q^u = (u − I) / p`.
    pub fn to_generator(&self, u: &TransitionMatrix) -> Result<GeneratorMatrix> {
        let n = self.n();
        if u.n() != n {
            return Err(Error::Dimension {
                expected: n,
                found: u.n(),
            });
        }
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if j == i {
                            0.0
                        } else {
                            u.get(i, j) / self.prob_per_rate
                        }
                    })
                    .collect()
            })
            .collect();
        GeneratorMatrix::from_off_diagonal(&rows)
    }

    /// Rate row of a transition row, checked against the box of state `i`.
    pub(crate) fn rate_row(&self, i: usize, u_row: &[f64]) -> Result<Vec<f64>> {
        let mut q: Vec<f64> = u_row.iter().map(|v| v / self.prob_per_rate).collect();
        q[i] = -(0..q.len()).filter(|&j| j != i).map(|j| q[j]).sum::<f64>();
        let set = self.rates.row_set(i);
        let v = set.violations(
            &q,
            self.rates.tolerances().row_sum.max(1e-12) * (1.0 / self.prob_per_rate),
        );
        if !v.is_empty() {
            return Err(Error::InfeasibleRow {
                state: i,
                reason: v.join("; "),
            });
        }
        Ok(set.project(&q))
    }

    /// `κ(t, i, u_i)`.
    pub fn kappa(&self, t: usize, i: usize, u_row: &[f64]) -> Result<f64> {
        let q = self.rate_row(i, u_row)?;
        Ok(self.discount_at(t) * self.value_scale * self.rates.payoff().value(i, &q)?)
    }

    /// Maps row prices `H` to rate-unit prices so that the discrete row
    /// objective is `value_scale · (g_i(q) + q · prices)` up to a constant.
    pub(crate) fn rate_prices(&self, h: &[f64]) -> Vec<f64> {
        let c = self.prob_per_rate / self.value_scale;
        h.iter().map(|v| v * c).collect()
    }
}

/// Discretization with mesh `δ`: `κ(k, i, u_i) = f(kδ, i, (u_i − e_i)/δ) · δ`,
/// `u = I + δ Q`.
pub fn discretize(model: &ModelSpec, delta: f64) -> Result<DiscreteModel> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::model("mesh", "must be positive and finite"));
    }
    let mut dm = DiscreteModel::new(model.clone(), delta, delta, delta).map_err(|e| match e {
        Error::MeshTooCoarse { state, .. } => Error::MeshTooCoarse { mesh: delta, state },
        e => e,
    })?;
    dm.mesh = Some(delta);
    Ok(dm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AdmissibleRowSet, DiscountSpec, RowPayoff, RunningPayoff};

    fn two_state(cap: f64) -> ModelSpec {
        ModelSpec::new(
            DiscountSpec::pseudo_exponential(0.5, 1.0, 2.0).unwrap(),
            RunningPayoff::new(vec![
                RowPayoff::constant(2, 1.0),
                RowPayoff::constant(2, 0.0),
            ])
            .unwrap(),
            vec![
                AdmissibleRowSet::uniform(0, 2, cap).unwrap(),
                AdmissibleRowSet::uniform(1, 2, cap).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_generator_maps_to_identity() {
        let dm = discretize(&two_state(4.0), 0.1).unwrap();
        let u = dm.to_transition(&GeneratorMatrix::zeros(2)).unwrap();
        assert_eq!(u, TransitionMatrix::identity(2));
    }

    #[test]
    fn two_state_mapping() {
        let dm = discretize(&two_state(4.0), 0.1).unwrap();
        let u = dm
            .to_transition(&GeneratorMatrix::two_state(1.0, 2.0))
            .unwrap();
        let want = [[0.9, 0.1], [0.2, 0.8]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((u.get(i, j) - want[i][j]).abs() < 1e-15);
            }
        }
        let q = dm.to_generator(&u).unwrap();
        assert!(q.max_abs_diff(&GeneratorMatrix::two_state(1.0, 2.0)) < 1e-14);
    }

    #[test]
    fn coarse_mesh_rejected() {
        assert!(matches!(
            discretize(&two_state(4.0), 0.3),
            Err(Error::MeshTooCoarse { state: 0, .. })
        ));
        assert!(discretize(&two_state(4.0), 0.25).is_ok());
    }

    #[test]
    fn bad_rows_rejected() {
        assert!(TransitionMatrix::from_rows(&[vec![0.5, 0.6], vec![0.0, 1.0]]).is_err());
        assert!(TransitionMatrix::from_rows(&[vec![1.1, -0.1], vec![0.0, 1.0]]).is_err());
        assert!(TransitionMatrix::two_state(0.2, 0.3).is_ok());
    }
}

//! `V(i, u) = E Σ_t κ(t, X_t, u_{X_t})` and `H_i(u) = E Σ_t κ(t+1, X_t, u_{X_t})`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DiscreteModel, TransitionMatrix};
use crate::error::{Error, Result};
use crate::linalg::solve_checked;
use crate::model::DiscountSpec;

/// Default absolute truncation tolerance for series evaluation.
pub const SERIES_TOL: f64 = 1e-12;

/// `κ(0, j, u_j)` for every state.
fn kappa0(dm: &DiscreteModel, u: &TransitionMatrix) -> Result<Vec<f64>> {
    if u.n() != dm.n() {
        return Err(Error::Dimension {
            expected: dm.n(),
            found: u.n(),
        });
    }
    (0..dm.n()).map(|j| dm.kappa(0, j, &u.row(j))).collect()
}

/// `(V, H)` in closed form for mixtures, by truncated series otherwise.
fn values_and_aux(dm: &DiscreteModel, u: &TransitionMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let k0 = kappa0(dm, u)?;
    match dm.rates().discount() {
        DiscountSpec::ExponentialMixture { weights, rates } => {
            let n = dm.n();
            let b = DVector::from_column_slice(&k0);
            let mut v = vec![0.0; n];
            let mut h = vec![0.0; n];
            for (w, rho) in weights.iter().zip(rates) {
                // δ_d(t) = Σ λ_k r_k^t, so Σ_t δ_d(t) u^t = Σ λ_k (I − r_k u)^{-1}.
                let r = (-rho * dm.step()).exp();
                let a = DMatrix::identity(n, n) - u.matrix() * r;
                let (x, _) = solve_checked(&a, &b, *rho)?;
                for j in 0..n {
                    v[j] += w * x[j];
                    h[j] += w * r * x[j];
                }
            }
            if v.iter().chain(&h).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("discrete value"));
            }
            Ok((v, h))
        }
        DiscountSpec::Generic(_) => {
            let s = discrete_values_series(dm, u, SERIES_TOL)?;
            Ok((s.values, s.aux))
        }
    }
}

pub fn discrete_values(dm: &DiscreteModel, u: &TransitionMatrix) -> Result<Vec<f64>> {
    Ok(values_and_aux(dm, u)?.0)
}

pub fn discrete_value(dm: &DiscreteModel, i: usize, u: &TransitionMatrix) -> Result<f64> {
    if i >= dm.n() {
        return Err(Error::Dimension {
            expected: dm.n(),
            found: i + 1,
        });
    }
    Ok(discrete_values(dm, u)?[i])
}

/// `H(u)`.
pub fn discrete_aux(dm: &DiscreteModel, u: &TransitionMatrix) -> Result<Vec<f64>> {
    Ok(values_and_aux(dm, u)?.1)
}

/// Bound on `Σ_{t ≥ T} δ_d(t)`.
fn discount_tail(dm: &DiscreteModel, t: usize) -> f64 {
    match dm.rates().discount() {
        DiscountSpec::ExponentialMixture { weights, rates } => weights
            .iter()
            .zip(rates)
            .map(|(w, rho)| {
                let r = (-rho * dm.step()).exp();
                w * r.powi(t as i32) / (1.0 - r)
            })
            .sum(),
        // δ nonincreasing: Σ_{t≥T} δ(t s) ≤ δ(T s) + (1/s) ∫_{T s}^∞ δ.
        d => d.value(t as f64 * dm.step()) + d.tail_mass(t as f64 * dm.step()) / dm.step(),
    }
}

/// Smallest `T` with `scale · Σ_{t ≥ T} δ_d(t) ≤ tol`.
///
/// Generic discounts cannot go past their declared horizon; the tail bound is
/// then checked against `tol` and an error returned if it is exceeded.
pub fn truncation_horizon(dm: &DiscreteModel, scale: f64, tol: f64) -> Result<usize> {
    if scale == 0.0 {
        return Ok(1);
    }
    let cap = match dm.rates().discount() {
        DiscountSpec::ExponentialMixture { weights, rates } => {
            // Per component: λ r^T / (1 − r) · scale ≤ tol / m.
            let m = weights.len() as f64;
            let t = weights
                .iter()
                .zip(rates)
                .map(|(w, rho)| {
                    let r = (-rho * dm.step()).exp();
                    let need = (tol * (1.0 - r) / (m * w * scale)).ln() / r.ln();
                    need.max(1.0).ceil()
                })
                .fold(1.0, f64::max);
            return Ok(t as usize);
        }
        DiscountSpec::Generic(g) => (g.horizon / dm.step()).ceil() as usize,
    };
    let bound = scale * discount_tail(dm, cap);
    if bound > tol {
        return Err(Error::TailBound { bound, tol });
    }
    Ok(cap)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesValues {
    pub values: Vec<f64>,
    pub aux: Vec<f64>,
    pub horizon: usize,
    /// Bound on the neglected tail of every entry.
    pub tail_bound: f64,
}

/// `V` and `H` by summing the series term by term up to the truncation horizon.
pub fn discrete_values_series(
    dm: &DiscreteModel,
    u: &TransitionMatrix,
    tol: f64,
) -> Result<SeriesValues> {
    let k0 = kappa0(dm, u)?;
    let scale = k0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let horizon = truncation_horizon(dm, scale, tol)?;
    let n = dm.n();
    let mut dist = DVector::from_column_slice(&k0);
    let mut v = DVector::zeros(n);
    let mut h = DVector::zeros(n);
    let mut next = dm.discount_at(0);
    for t in 0..horizon {
        let cur = next;
        next = dm.discount_at(t + 1);
        v += &dist * cur;
        h += &dist * next;
        dist = u.matrix() * dist;
    }
    Ok(SeriesValues {
        values: v.iter().copied().collect(),
        aux: h.iter().copied().collect(),
        horizon,
        tail_bound: scale * discount_tail(dm, horizon),
    })
}

/// `V(i, u ⊗₁ u*) = κ(0, i, u_i) + H(u*) · u_i`.
pub fn concat_value(
    dm: &DiscreteModel,
    i: usize,
    u: &TransitionMatrix,
    ustar: &TransitionMatrix,
) -> Result<f64> {
    let h = discrete_aux(dm, ustar)?;
    let row = u.row(i);
    Ok(dm.kappa(0, i, &row)? + row.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>())
}

/// `V(i, u ⊗₁ u*)` summed directly: one step under `u`, then `u*` forever.
pub fn concat_value_series(
    dm: &DiscreteModel,
    i: usize,
    u: &TransitionMatrix,
    ustar: &TransitionMatrix,
    tol: f64,
) -> Result<f64> {
    let k0 = kappa0(dm, ustar)?;
    let scale = k0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let horizon = truncation_horizon(dm, scale, tol)?;
    let mut dist = DVector::from_column_slice(&k0);
    let first = u.row(i);
    let mut total = dm.kappa(0, i, &first)?;
    for t in 1..=horizon {
        total += dm.discount_at(t)
            * first
                .iter()
                .zip(dist.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>();
        dist = ustar.matrix() * dist;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::super::discretize;
    use super::*;
    use crate::twostate::eg51_model;

    #[test]
    fn identity_control_of_quartic_example() {
        let h = 0.01;
        let dm = discretize(&eg51_model(1.0).to_model_spec().unwrap(), h).unwrap();
        let u = TransitionMatrix::identity(2);
        let v = discrete_values(&dm, &u).unwrap();
        assert_eq!(v[1], 0.0);
        let want = 0.5 * (1.0 / (1.0 - (-h).exp()) + 1.0 / (1.0 - (-2.0 * h).exp())) * -h;
        assert!((v[0] - want).abs() < 1e-12);
        let s = discrete_values_series(&dm, &u, 1e-13).unwrap();
        assert!((s.values[0] - v[0]).abs() < 1e-11);
        let a = discrete_aux(&dm, &u).unwrap();
        assert!((s.aux[0] - a[0]).abs() < 1e-11);
    }

    #[test]
    fn concatenation_identity_holds() {
        let dm = discretize(
            &crate::twostate::builtin("eg41")
                .unwrap()
                .model
                .to_model_spec()
                .unwrap(),
            0.1,
        )
        .unwrap();
        let u = TransitionMatrix::two_state(0.03, 0.2).unwrap();
        let us = TransitionMatrix::two_state(0.1, 0.05).unwrap();
        for i in 0..2 {
            let a = concat_value(&dm, i, &u, &us).unwrap();
            let b = concat_value_series(&dm, i, &u, &us, 1e-13).unwrap();
            assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
        // A control concatenated with itself is itself.
        let v = discrete_values(&dm, &us).unwrap();
        assert!((concat_value(&dm, 0, &us, &us).unwrap() - v[0]).abs() < 1e-13);
    }
}

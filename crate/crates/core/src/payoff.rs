//! Expected discounted payoffs `F`, shifted payoffs `F_ε`, time derivatives
//! `G`, and the payoff of the concatenated control `Q ⊗_ε Q*`.
//!
//! Exponential mixtures go through resolvents `(ρ_k I − Q)^{-1}`; generic
//! discounts are integrated numerically against `e^{Qt}` up to their declared
//! horizon.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm, solve_checked};
use crate::model::{validate_generator, DiscountSpec, GeneratorMatrix, ModelSpec};
use crate::quadrature::integrate_vec;

/// Absolute tolerance on the discount tail for the quadrature path.
pub const QUAD_TAIL_TOL: f64 = 1e-12;
/// Absolute tolerance requested from the adaptive integrator.
pub const QUAD_TOL: f64 = 1e-11;
/// Largest tail `sup|g| · ∫_T^∞ δ` accepted for generic discounts.
pub const GENERIC_TAIL_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffVector {
    pub values: Vec<f64>,
    /// Worst relative residual among the resolvent solves (0 on the quadrature path).
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftedPayoffVector {
    pub shift: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativePayoffVector {
    pub values: Vec<f64>,
}

impl PayoffVector {
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        self.values[i] - self.values[j]
    }
}

/// `e^{Qt}`, checked to be stochastic and clamped into `[0, 1]`.
pub fn transition_matrix(q: &GeneratorMatrix, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Unsupported(format!(
            "transition time {t} must be finite and >= 0"
        )));
    }
    q.check_structure(1e-10)?;
    let n = q.n();
    if t == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let mut p = expm(&(q.matrix() * t))?;
    for i in 0..n {
        let s: f64 = p.row(i).sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::Inaccurate(format!(
                "row {} of e^(Qt) sums to {s}",
                i + 1
            )));
        }
        for j in 0..n {
            let v = p[(i, j)];
            if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(Error::Inaccurate(format!(
                    "entry ({}, {}) of e^(Qt) is {v}",
                    i + 1,
                    j + 1
                )));
            }
            p[(i, j)] = v.clamp(0.0, 1.0);
        }
    }
    Ok(p)
}

fn checked_rates(model: &ModelSpec, q: &GeneratorMatrix) -> Result<DVector<f64>> {
    validate_generator(model, q).into_result()?;
    Ok(DVector::from_vec(model.payoff_rates(q)?))
}

/// `Σ_k w_k (ρ_k I − Q)^{-1} g` for per-component weights `w_k`.
fn resolvent_sum(
    weights: &[f64],
    rates: &[f64],
    coef: impl Fn(usize) -> f64,
    q: &GeneratorMatrix,
    g: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let n = q.n();
    let mut out = DVector::zeros(n);
    let mut worst: f64 = 0.0;
    for (k, (&w, &rho)) in weights.iter().zip(rates).enumerate() {
        let a = DMatrix::identity(n, n) * rho - q.matrix();
        let (x, rel) = solve_checked(&a, g, rho)?;
        worst = worst.max(rel);
        out += x * (w * coef(k));
    }
    Ok((out, worst))
}

/// `∫_0^T w(t) e^{Qt} g dt` by adaptive quadrature.
fn integrate_against(
    q: &GeneratorMatrix,
    g: &DVector<f64>,
    weight: impl Fn(f64) -> f64,
    horizon: f64,
    tol: f64,
) -> Result<DVector<f64>> {
    let panels = (horizon.ceil() as usize).clamp(4, 256);
    let v = integrate_vec(
        |t| {
            let e = expm(&(q.matrix() * t))?;
            Ok((e * g * weight(t)).iter().copied().collect())
        },
        0.0,
        horizon,
        tol,
        panels,
    )?;
    Ok(DVector::from_vec(v))
}

fn quadrature_horizon(model: &ModelSpec, g: &DVector<f64>, shift: f64) -> Result<f64> {
    let scale = g.amax();
    match model.discount() {
        DiscountSpec::ExponentialMixture { .. } => {
            Ok(model.discount().horizon_for(scale, QUAD_TAIL_TOL))
        }
        DiscountSpec::Generic(d) => {
            let bound = scale * d.tail_bound;
            if bound > GENERIC_TAIL_TOL {
                return Err(Error::TailBound {
                    bound,
                    tol: GENERIC_TAIL_TOL,
                });
            }
            Ok((d.horizon - shift).max(0.0))
        }
    }
}

/// `F(Q)`: closed form for mixtures, quadrature for generic discounts.
pub fn payoff_vector(model: &ModelSpec, q: &GeneratorMatrix) -> Result<PayoffVector> {
    match model.discount() {
        DiscountSpec::ExponentialMixture { weights, rates } => {
            let g = checked_rates(model, q)?;
            let (v, residual) = resolvent_sum(weights, rates, |_| 1.0, q, &g)?;
            Ok(PayoffVector {
                values: v.iter().copied().collect(),
                residual,
            })
        }
        DiscountSpec::Generic(_) => payoff_vector_quadrature(model, q),
    }
}

/// `F(Q)` by integrating `δ(t) e^{Qt} g(Q)` numerically, for any discount.
pub fn payoff_vector_quadrature(model: &ModelSpec, q: &GeneratorMatrix) -> Result<PayoffVector> {
    let g = checked_rates(model, q)?;
    let horizon = quadrature_horizon(model, &g, 0.0)?;
    let d = model.discount();
    let v = integrate_against(q, &g, |t| d.value(t), horizon, QUAD_TOL)?;
    Ok(PayoffVector {
        values: v.iter().copied().collect(),
        residual: 0.0,
    })
}

/// `F_ε(Q)`, the payoff with the discount clock started at `ε`.
pub fn shifted_payoff_vector(
    model: &ModelSpec,
    q: &GeneratorMatrix,
    eps: f64,
) -> Result<ShiftedPayoffVector> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Unsupported(format!(
            "shift {eps} must be finite and >= 0"
        )));
    }
    let values = match model.discount() {
        DiscountSpec::ExponentialMixture { weights, rates } => {
            let g = checked_rates(model, q)?;
            resolvent_sum(weights, rates, |k| (-rates[k] * eps).exp(), q, &g)?.0
        }
        DiscountSpec::Generic(_) => shifted_quadrature(model, q, eps)?,
    };
    Ok(ShiftedPayoffVector {
        shift: eps,
        values: values.iter().copied().collect(),
    })
}

fn shifted_quadrature(model: &ModelSpec, q: &GeneratorMatrix, eps: f64) -> Result<DVector<f64>> {
    let g = checked_rates(model, q)?;
    let horizon = quadrature_horizon(model, &g, eps)?;
    let d = model.discount();
    integrate_against(q, &g, |t| d.value(t + eps), horizon, QUAD_TOL)
}

/// `F_ε(Q)` by quadrature regardless of the discount kind.
pub fn shifted_payoff_vector_quadrature(
    model: &ModelSpec,
    q: &GeneratorMatrix,
    eps: f64,
) -> Result<ShiftedPayoffVector> {
    Ok(ShiftedPayoffVector {
        shift: eps,
        values: shifted_quadrature(model, q, eps)?.iter().copied().collect(),
    })
}

/// `G(Q) = E ∫ δ'(t) g(X_t, Q_{X_t}) dt`.
pub fn derivative_payoff_vector(
    model: &ModelSpec,
    q: &GeneratorMatrix,
) -> Result<DerivativePayoffVector> {
    let g = checked_rates(model, q)?;
    let v = match model.discount() {
        DiscountSpec::ExponentialMixture { weights, rates } => {
            resolvent_sum(weights, rates, |k| -rates[k], q, &g)?.0
        }
        DiscountSpec::Generic(_) => {
            let horizon = quadrature_horizon(model, &g, 0.0)?;
            let d = model.discount();
            integrate_against(q, &g, |t| d.derivative(t), horizon, QUAD_TOL)?
        }
    };
    Ok(DerivativePayoffVector {
        values: v.iter().copied().collect(),
    })
}

/// `F(i, Q ⊗_ε Q*)`: follow `Q` on `[0, ε]`, then `Q*`.
pub fn concat_payoff(
    model: &ModelSpec,
    i: usize,
    q: &GeneratorMatrix,
    qstar: &GeneratorMatrix,
    eps: f64,
) -> Result<f64> {
    if i >= model.n() {
        return Err(Error::Dimension {
            expected: model.n(),
            found: i + 1,
        });
    }
    if eps == 0.0 {
        return Ok(payoff_vector(model, qstar)?.values[i]);
    }
    Ok(concat_payoff_vector(model, q, qstar, eps)?[i])
}

/// All states at once: `F(·, Q ⊗_ε Q*)`.
pub fn concat_payoff_vector(
    model: &ModelSpec,
    q: &GeneratorMatrix,
    qstar: &GeneratorMatrix,
    eps: f64,
) -> Result<Vec<f64>> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Unsupported(format!(
            "window {eps} must be finite and >= 0"
        )));
    }
    let g = checked_rates(model, q)?;
    let tail = DVector::from_vec(shifted_payoff_vector(model, qstar, eps)?.values);
    if eps == 0.0 {
        return Ok(tail.iter().copied().collect());
    }
    let e = expm(&(q.matrix() * eps))?;
    let running = match model.discount() {
        DiscountSpec::ExponentialMixture { weights, rates } => {
            let n = q.n();
            let mut acc = DVector::zeros(n);
            for (&w, &rho) in weights.iter().zip(rates) {
                let a = DMatrix::identity(n, n) * rho - q.matrix();
                let (x, _) = solve_checked(&a, &g, rho)?;
                // (ρI − Q)^{-1} commutes with e^{Qε}.
                acc += (&x - &e * &x * (-rho * eps).exp()) * w;
            }
            acc
        }
        DiscountSpec::Generic(_) => {
            let d = model.discount();
            integrate_against(q, &g, |t| d.value(t), eps, QUAD_TOL * eps.min(1.0))?
        }
    };
    Ok((running + e * tail).iter().copied().collect())
}

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance on `Σ λ_k = 1` for exponential mixtures.
pub const DEFAULT_WEIGHT_SUM_TOL: f64 = 1e-12;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Discount function with `δ(0) = 1` paired with its derivative.
///
/// Closed-form evaluation paths (resolvents, geometric series, segment
/// integrals in simulation) are only available for exponential mixtures.
#[derive(Clone)]
pub enum DiscountSpec {
    /// `δ(t) = Σ_k λ_k e^{-ρ_k t}`.
    ExponentialMixture {
        weights: Vec<f64>,
        rates: Vec<f64>,
    },
    Generic(GenericDiscount),
}

/// A user-supplied discount evaluated by quadrature up to a declared horizon.
#[derive(Clone)]
pub struct GenericDiscount {
    pub label: String,
    pub value: RealFn,
    pub derivative: RealFn,
    /// Truncation horizon for quadrature.
    pub horizon: f64,
    /// Declared bound on `∫_horizon^∞ δ(t) dt`.
    pub tail_bound: f64,
}

impl fmt::Debug for DiscountSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscountSpec::ExponentialMixture { weights, rates } => f
                .debug_struct("ExponentialMixture")
                .field("weights", weights)
                .field("rates", rates)
                .finish(),
            DiscountSpec::Generic(g) => f
                .debug_struct("Generic")
                .field("label", &g.label)
                .field("horizon", &g.horizon)
                .field("tail_bound", &g.tail_bound)
                .finish(),
        }
    }
}

impl DiscountSpec {
    pub fn mixture(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let d = DiscountSpec::ExponentialMixture { weights, rates };
        d.validate(DEFAULT_WEIGHT_SUM_TOL)?;
        Ok(d)
    }

    /// `λ e^{-ρ t} + (1 - λ) e^{-ρ' t}`.
    pub fn pseudo_exponential(lambda: f64, rho: f64, rho_prime: f64) -> Result<Self> {
        Self::mixture(vec![lambda, 1.0 - lambda], vec![rho, rho_prime])
    }

    pub fn exponential(rho: f64) -> Result<Self> {
        Self::mixture(vec![1.0], vec![rho])
    }

    /// Generalized hyperbolic `(1 + β t)^{-k}` with `k > 1`, truncated at `horizon`.
    pub fn hyperbolic(beta: f64, power: f64, horizon: f64) -> Result<Self> {
        if !(beta > 0.0 && power > 1.0 && horizon > 0.0) {
            return Err(Error::model(
                "discount",
                "hyperbolic discount needs beta > 0, power > 1, horizon > 0",
            ));
        }
        let tail_bound = (1.0 + beta * horizon).powf(1.0 - power) / (beta * (power - 1.0));
        let d = DiscountSpec::Generic(GenericDiscount {
            label: format!("hyperbolic(beta={beta}, power={power})"),
            value: Arc::new(move |t| (1.0 + beta * t).powf(-power)),
            derivative: Arc::new(move |t| -power * beta * (1.0 + beta * t).powf(-power - 1.0)),
            horizon,
            tail_bound,
        });
        d.validate(DEFAULT_WEIGHT_SUM_TOL)?;
        Ok(d)
    }

    pub fn validate(&self, weight_sum_tol: f64) -> Result<()> {
        match self {
            DiscountSpec::ExponentialMixture { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return Err(Error::model(
                        "discount",
                        format!("{} weights for {} rates", weights.len(), rates.len()),
                    ));
                }
                if let Some(k) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
                    return Err(Error::model(
                        format!("discount.weights[{k}]"),
                        "must be > 0",
                    ));
                }
                if let Some(k) = rates.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
                    return Err(Error::model(format!("discount.rates[{k}]"), "must be > 0"));
                }
                let s: f64 = weights.iter().sum();
                if (s - 1.0).abs() > weight_sum_tol {
                    return Err(Error::model(
                        "discount.weights",
                        format!("sum to {s}, expected 1"),
                    ));
                }
                Ok(())
            }
            DiscountSpec::Generic(g) => {
                if !(g.horizon > 0.0 && g.horizon.is_finite()) {
                    return Err(Error::model("discount.horizon", "must be finite and > 0"));
                }
                let d0 = (g.value)(0.0);
                if (d0 - 1.0).abs() > 1e-12 {
                    return Err(Error::model(
                        "discount",
                        format!("delta(0) = {d0}, expected 1"),
                    ));
                }
                let mut prev = d0;
                for s in 1..=1000 {
                    let t = g.horizon * s as f64 / 1000.0;
                    let v = (g.value)(t);
                    if !v.is_finite() || v > prev + 1e-15 {
                        return Err(Error::model(
                            "discount",
                            format!("not nonincreasing near t = {t}"),
                        ));
                    }
                    prev = v;
                }
                if !(g.tail_bound >= 0.0 && g.tail_bound.is_finite()) {
                    return Err(Error::model(
                        "discount.tail_bound",
                        "must be finite and >= 0",
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            DiscountSpec::ExponentialMixture { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * (-r * t).exp())
                .sum(),
            DiscountSpec::Generic(g) => (g.value)(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            DiscountSpec::ExponentialMixture { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| -w * r * (-r * t).exp())
                .sum(),
            DiscountSpec::Generic(g) => (g.derivative)(t),
        }
    }

    /// `∫_0^∞ δ`, closed form for mixtures; `None` for generic discounts.
    pub fn total_mass(&self) -> Option<f64> {
        match self {
            DiscountSpec::ExponentialMixture { weights, rates } => {
                Some(weights.iter().zip(rates).map(|(w, r)| w / r).sum())
            }
            DiscountSpec::Generic(_) => None,
        }
    }

    pub fn components(&self) -> Option<(&[f64], &[f64])> {
        match self {
            DiscountSpec::ExponentialMixture { weights, rates } => Some((weights, rates)),
            DiscountSpec::Generic(_) => None,
        }
    }

    /// Horizon `T` with `∫_T^∞ δ(t) dt · scale ≤ tol`.
    pub fn horizon_for(&self, scale: f64, tol: f64) -> f64 {
        match self {
            DiscountSpec::ExponentialMixture { weights, rates } => {
                if scale <= 0.0 {
                    return 1.0;
                }
                let m = weights.len() as f64;
                weights
                    .iter()
                    .zip(rates)
                    .map(|(w, r)| ((m * w * scale) / (r * tol)).ln().max(0.0) / r)
                    .fold(1.0, f64::max)
            }
            DiscountSpec::Generic(g) => g.horizon,
        }
    }

    /// `∫_T^∞ δ(t) dt` (exact for mixtures, declared bound for generic).
    pub fn tail_mass(&self, horizon: f64) -> f64 {
        match self {
            DiscountSpec::ExponentialMixture { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * (-r * horizon).exp() / r)
                .sum(),
            DiscountSpec::Generic(g) => g.tail_bound,
        }
    }

    /// Serializable description.
    pub fn describe(&self) -> serde_json::Value {
        match self {
            DiscountSpec::ExponentialMixture { weights, rates } => serde_json::json!({
                "kind": "exponential_mixture",
                "weights": weights,
                "rates": rates,
            }),
            DiscountSpec::Generic(g) => serde_json::json!({
                "kind": "generic",
                "label": g.label,
                "horizon": g.horizon,
                "tail_bound": g.tail_bound,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    #[test]
    fn mixture_validation() {
        assert!(DiscountSpec::mixture(vec![0.5, 0.5], vec![1.0, 2.0]).is_ok());
        assert!(DiscountSpec::mixture(vec![0.5, 0.6], vec![1.0, 2.0]).is_err());
        assert!(DiscountSpec::mixture(vec![1.0], vec![0.0]).is_err());
        assert!(DiscountSpec::mixture(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(DiscountSpec::mixture(vec![1.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn mixture_mass_matches_quadrature() {
        let d = DiscountSpec::mixture(vec![0.2, 0.3, 0.5], vec![0.7, 1.9, 4.0]).unwrap();
        assert_eq!(d.value(0.0), 1.0);
        let t = d.horizon_for(1.0, 1e-14);
        let q = integrate(|t| d.value(t), 0.0, t, 1e-13).unwrap() + d.tail_mass(t);
        assert!((q - d.total_mass().unwrap()).abs() < 1e-10);
    }

    #[test]
    fn hyperbolic_tail_is_exact() {
        let d = DiscountSpec::hyperbolic(1.0, 3.0, 50.0).unwrap();
        let mass = 1.0 / 2.0;
        let q = integrate(|t| d.value(t), 0.0, 50.0, 1e-13).unwrap();
        assert!((q + d.tail_mass(50.0) - mass).abs() < 1e-10);
        assert!((d.derivative(0.0) + 3.0).abs() < 1e-15);
    }
}

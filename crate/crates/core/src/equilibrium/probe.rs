//! Numerical ε-sweeps of `F(i, Q*) − F(i, Q ⊗_ε Q*)`.

use serde::{Deserialize, Serialize};

use super::functionals::{gamma_row, lambda_full, Baseline};
use crate::error::{Error, Result};
use crate::model::{GeneratorMatrix, ModelSpec};
use crate::payoff::{concat_payoff_vector, payoff_vector};

/// Relative size of floating-point noise in a concatenated payoff.
const NOISE_REL: f64 = 1e-13;
/// Points used by the log-log regression.
const FIT_POINTS: usize = 5;

/// `ε_k = 0.1 · 2^{-k}` for `k = 0..12`.
pub fn default_eps_grid() -> Vec<f64> {
    (0..12).map(|k| 0.1 * 0.5f64.powi(k)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSign {
    Positive,
    Negative,
    /// No sample rises above the noise floor.
    Zero,
    Mixed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionProbe {
    pub state: usize,
    pub deviation: GeneratorMatrix,
    pub baseline: GeneratorMatrix,
    pub eps: Vec<f64>,
    /// `F(i, Q*) − F(i, Q ⊗_ε Q*)` per grid point.
    pub differences: Vec<f64>,
    pub noise_floor: f64,
    /// Slope of `log|D|` against `log ε` on the smallest resolved points.
    pub fitted_order: Option<f64>,
    /// RMS residual of that regression.
    pub regression_residual: Option<f64>,
    /// `lim D/ε^n` with `n` the rounded order, by polynomial extrapolation.
    pub fitted_coefficient: Option<f64>,
    /// `Γ(Q*_i) − Γ(Q_i)`.
    pub analytic_l1: f64,
    /// `½ (Λ(i, Q*) − Λ(i, Q))`.
    pub analytic_l2: f64,
    pub tail_sign: TailSign,
    /// Number of smallest-ε resolved samples sharing the final sign.
    pub stable_tail: usize,
}

impl ExpansionProbe {
    /// Strictly negative, beyond the noise floor, at the three smallest ε.
    pub fn negative_at_smallest(&self) -> bool {
        let n = self.differences.len();
        n >= 3
            && self.differences[n - 3..]
                .iter()
                .all(|&d| d < -self.noise_floor)
    }

    /// Three successive samples below `-tol` within the stable negative tail.
    pub fn negative_run_below(&self, tol: f64) -> bool {
        if self.tail_sign != TailSign::Negative {
            return false;
        }
        let n = self.differences.len();
        let tail = &self.differences[n.saturating_sub(self.stable_tail)..];
        tail.windows(3).any(|w| w.iter().all(|&d| d < -tol))
    }
}

/// Samples the deviation gain over `eps_grid` (strictly decreasing, positive)
/// and fits leading order and coefficient.
pub fn expansion_probe(
    model: &ModelSpec,
    i: usize,
    q: &GeneratorMatrix,
    qstar: &GeneratorMatrix,
    eps_grid: &[f64],
) -> Result<ExpansionProbe> {
    if eps_grid.is_empty()
        || eps_grid.iter().any(|&e| !(e > 0.0 && e.is_finite()))
        || eps_grid.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::Unsupported(
            "ε grid must be positive and strictly decreasing".into(),
        ));
    }
    if i >= model.n() {
        return Err(Error::Dimension {
            expected: model.n(),
            found: i + 1,
        });
    }
    let base = Baseline::new(model, qstar)?;
    let fq = payoff_vector(model, q)?;
    let fstar_i = base.f.values[i];
    let differences: Vec<f64> = if q == qstar {
        vec![0.0; eps_grid.len()]
    } else {
        eps_grid
            .iter()
            .map(|&e| Ok(fstar_i - concat_payoff_vector(model, q, qstar, e)?[i]))
            .collect::<Result<_>>()?
    };
    let scale = base
        .f
        .values
        .iter()
        .chain(&fq.values)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let noise_floor = NOISE_REL * (1.0 + scale);

    let analytic_l1 =
        gamma_row(model, i, &qstar.row(i), &base.f)? - gamma_row(model, i, &q.row(i), &base.f)?;
    let analytic_l2 =
        0.5 * (lambda_full(model, i, qstar, &base)? - lambda_full(model, i, q, &base)?);

    let (fitted_order, regression_residual) =
        fit_order(eps_grid, &differences, 100.0 * noise_floor);
    let fitted_coefficient = fitted_order.and_then(|p| {
        let n = p.round().max(1.0) as i32;
        extrapolate_coefficient(eps_grid, &differences, n, 1e4 * noise_floor)
    });
    let (tail_sign, stable_tail) = tail(&differences, noise_floor);
    Ok(ExpansionProbe {
        state: i,
        deviation: q.clone(),
        baseline: qstar.clone(),
        eps: eps_grid.to_vec(),
        differences,
        noise_floor,
        fitted_order,
        regression_residual,
        fitted_coefficient,
        analytic_l1,
        analytic_l2,
        tail_sign,
        stable_tail,
    })
}

fn fit_order(eps: &[f64], d: &[f64], floor: f64) -> (Option<f64>, Option<f64>) {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(d)
        .filter(|(_, v)| v.abs() > floor)
        .map(|(e, v)| (e.ln(), v.abs().ln()))
        .collect();
    let pts = &pts[pts.len().saturating_sub(FIT_POINTS)..];
    if pts.len() < 2 {
        return (None, None);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (pts
        .iter()
        .map(|p| (p.1 - icpt - slope * p.0).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    (Some(slope), Some(rms))
}

/// Neville extrapolation of `D/ε^n` to `ε = 0` from the three smallest
/// well-resolved samples.
fn extrapolate_coefficient(eps: &[f64], d: &[f64], n: i32, floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(d)
        .filter(|(_, v)| v.abs() > floor)
        .map(|(&e, &v)| (e, v / e.powi(n)))
        .collect();
    let pts = &pts[pts.len().saturating_sub(3)..];
    if pts.is_empty() {
        return None;
    }
    let mut p: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let k = p.len();
    for lvl in 1..k {
        for a in 0..k - lvl {
            let b = a + lvl;
            // Evaluate the interpolant at 0.
            p[a] = (x[b] * p[a] - x[a] * p[a + 1]) / (x[b] - x[a]);
        }
    }
    Some(p[0])
}

fn tail(d: &[f64], noise: f64) -> (TailSign, usize) {
    let sig: Vec<f64> = d.iter().copied().filter(|v| v.abs() > noise).collect();
    let Some(&last) = sig.last() else {
        return (TailSign::Zero, 0);
    };
    let run = sig
        .iter()
        .rev()
        .take_while(|v| v.signum() == last.signum())
        .count();
    // Samples at the very end that drowned in noise break the run.
    let trailing_noise = d.iter().rev().take_while(|v| v.abs() <= noise).count();
    if trailing_noise > 0 || run < 3 {
        return (TailSign::Mixed, run);
    }
    let s = if last > 0.0 {
        TailSign::Positive
    } else {
        TailSign::Negative
    };
    (s, run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_geometric() {
        let g = default_eps_grid();
        assert_eq!(g.len(), 12);
        assert_eq!(g[0], 0.1);
        assert!((g[11] - 0.1 / 2048.0).abs() < 1e-18);
    }

    #[test]
    fn order_and_coefficient_of_synthetic_series() {
        let e = default_eps_grid();
        let d: Vec<f64> = e.iter().map(|x| -0.3 * x * x + 2.0 * x * x * x).collect();
        let (p, r) = fit_order(&e, &d, 1e-14);
        assert!((p.unwrap() - 2.0).abs() < 0.01);
        assert!(r.unwrap() < 1e-2);
        let c = extrapolate_coefficient(&e, &d, 2, 1e-12).unwrap();
        assert!((c + 0.3).abs() < 1e-9);
        assert_eq!(tail(&d, 1e-14), (TailSign::Negative, 12));
    }

    #[test]
    fn sign_change_is_mixed() {
        let d = [1.0, 0.5, -0.1, -0.01, 0.001];
        assert_eq!(tail(&d, 1e-9).0, TailSign::Mixed);
    }
}

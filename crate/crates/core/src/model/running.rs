use serde::{Deserialize, Serialize};

use super::poly::{PiecewisePoly, Poly};
use crate::error::{Error, Result};

/// Time-zero running payoff of one state as a function of that state's
/// generator row: `g_i(q) = c_i + Σ_{j≠i} p_ij(q_j)`.
///
/// Only off-diagonal rates enter; the diagonal is implied by the zero row sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowPayoff {
    pub constant: f64,
    /// Indexed by target state; `None` (and always the diagonal) contributes zero.
    pub terms: Vec<Option<PiecewisePoly>>,
}

impl RowPayoff {
    pub fn constant(n: usize, c: f64) -> Self {
        RowPayoff {
            constant: c,
            terms: vec![None; n],
        }
    }

    pub fn term(&self, j: usize) -> Option<&PiecewisePoly> {
        self.terms.get(j).and_then(|t| t.as_ref())
    }

    /// The univariate term of entry `j`; a missing term is the zero
    /// polynomial on `[0, ∞)`.
    pub fn entry_fn(&self, j: usize) -> PiecewisePoly {
        self.term(j)
            .cloned()
            .unwrap_or_else(|| PiecewisePoly::single(0.0, f64::INFINITY, Poly::zero()))
    }
}

/// Per-state running payoffs `g_i`, so that `f(t, i, q) = δ(t) g_i(q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningPayoff {
    rows: Vec<RowPayoff>,
}

impl RunningPayoff {
    pub fn new(rows: Vec<RowPayoff>) -> Result<Self> {
        let n = rows.len();
        for (i, r) in rows.iter().enumerate() {
            if r.terms.len() != n {
                return Err(Error::model(
                    format!("rows[{i}].terms"),
                    format!("expected {n} entries, found {}", r.terms.len()),
                ));
            }
            if r.terms[i].is_some() {
                return Err(Error::model(
                    format!("rows[{i}].terms[{i}]"),
                    "diagonal entry cannot carry a payoff term",
                ));
            }
            if !r.constant.is_finite() {
                return Err(Error::model(format!("rows[{i}].constant"), "non-finite"));
            }
        }
        Ok(RunningPayoff { rows })
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &RowPayoff {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[RowPayoff] {
        &self.rows
    }

    /// `g_i(q)` for a full generator row `q` (length N).
    pub fn value(&self, i: usize, q: &[f64]) -> Result<f64> {
        let r = &self.rows[i];
        let mut v = r.constant;
        for (j, &x) in q.iter().enumerate() {
            if j == i {
                continue;
            }
            if let Some(p) = r.term(j) {
                v += p.value(x)?;
            }
        }
        Ok(v)
    }

    /// Gradient of `g_i` with respect to the off-diagonal rates; the diagonal
    /// slot is zero.
    pub fn gradient(&self, i: usize, q: &[f64]) -> Result<Vec<f64>> {
        let r = &self.rows[i];
        q.iter()
            .enumerate()
            .map(|(j, &x)| match r.term(j) {
                Some(p) if j != i => p.derivative(x),
                _ => Ok(0.0),
            })
            .collect()
    }

    /// Whether every `g_i` is concave on the given per-entry upper limits.
    pub fn is_concave(&self, limits: &[Vec<f64>]) -> bool {
        self.rows.iter().enumerate().all(|(i, r)| {
            r.terms.iter().enumerate().all(|(j, t)| match t {
                Some(p) => p.is_concave_on(limits[i][j]),
                None => true,
            })
        })
    }

    /// Whether every term is C¹ across its knots.
    pub fn is_c1(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.terms.iter().flatten().all(|p| p.is_c1()))
    }

    /// Largest `|g_i(q)|` over states for the rows of `q`.
    pub fn sup_on(&self, rows: &[Vec<f64>]) -> Result<f64> {
        let mut s: f64 = 0.0;
        for (i, q) in rows.iter().enumerate() {
            s = s.max(self.value(i, q)?.abs());
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunningPayoff {
        let quad = PiecewisePoly::single(0.0, 10.0, Poly::new(vec![0.0, 1.0, -0.5]));
        let lin = PiecewisePoly::single(0.0, 10.0, Poly::new(vec![0.0, -2.0]));
        RunningPayoff::new(vec![
            RowPayoff {
                constant: 1.0,
                terms: vec![None, Some(quad.clone()), Some(lin)],
            },
            RowPayoff::constant(3, 0.5),
            RowPayoff {
                constant: 0.0,
                terms: vec![Some(quad), None, None],
            },
        ])
        .unwrap()
    }

    #[test]
    fn separable_value_and_gradient() {
        let g = sample();
        let q = [-3.0, 2.0, 1.0];
        assert_eq!(g.value(0, &q).unwrap(), 1.0 + (2.0 - 2.0) - 2.0);
        assert_eq!(g.gradient(0, &q).unwrap(), vec![0.0, -1.0, -2.0]);
        assert_eq!(g.value(1, &[1.0, -1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn diagonal_term_rejected() {
        let p = PiecewisePoly::single(0.0, 1.0, Poly::constant(1.0));
        let r = RunningPayoff::new(vec![RowPayoff {
            constant: 0.0,
            terms: vec![Some(p)],
        }]);
        assert!(r.is_err());
    }

    #[test]
    fn rate_outside_payoff_domain_errors() {
        let g = sample();
        assert!(g.value(0, &[-11.0, 11.0, 0.0]).is_err());
    }
}

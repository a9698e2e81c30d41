use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack used when deciding whether a rate sits on a box face.
pub const BOUND_TOL: f64 = 1e-12;

/// Per-entry box `lo_ij ≤ q_ij ≤ hi_ij` for the off-diagonal rates of row `i`.
/// The diagonal is determined by the zero row sum and its bound slot is unused.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleRowSet {
    state: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Which one-sided moves along `e_j - e_i` keep the row feasible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionFeasibility {
    pub target: usize,
    pub increase: bool,
    pub decrease: bool,
}

impl AdmissibleRowSet {
    pub fn new(state: usize, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let n = lo.len();
        if hi.len() != n || state >= n {
            return Err(Error::model(
                format!("boxes[{state}]"),
                format!(
                    "bounds of length {} / {} for state {state}",
                    lo.len(),
                    hi.len()
                ),
            ));
        }
        for j in (0..n).filter(|&j| j != state) {
            let (l, h) = (lo[j], hi[j]);
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::model(
                    format!("boxes[{state}].lo[{j}]"),
                    "must be finite and >= 0",
                ));
            }
            if h.is_nan() || h < l {
                return Err(Error::model(
                    format!("boxes[{state}].hi[{j}]"),
                    "must be >= lo",
                ));
            }
        }
        let mut lo = lo;
        let mut hi = hi;
        lo[state] = 0.0;
        hi[state] = 0.0;
        Ok(AdmissibleRowSet { state, lo, hi })
    }

    /// Every off-diagonal entry in `[0, hi]`.
    pub fn uniform(state: usize, n: usize, hi: f64) -> Result<Self> {
        Self::new(state, vec![0.0; n], vec![hi; n])
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self, j: usize) -> f64 {
        self.lo[j]
    }

    pub fn hi(&self, j: usize) -> f64 {
        self.hi[j]
    }

    pub fn targets(&self) -> impl Iterator<Item = usize> + '_ {
        let s = self.state;
        (0..self.dim()).filter(move |&j| j != s)
    }

    pub fn is_bounded(&self) -> bool {
        self.targets().all(|j| self.hi[j].is_finite())
    }

    /// Sum of upper bounds over the off-diagonal entries (the largest exit rate).
    pub fn max_exit_rate(&self) -> f64 {
        self.targets().map(|j| self.hi[j]).sum()
    }

    /// Reasons `q` is not in the set, empty when feasible.
    pub fn violations(&self, q: &[f64], tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if q.len() != self.dim() {
            out.push(format!("row length {} != {}", q.len(), self.dim()));
            return out;
        }
        let mut off = 0.0;
        for j in self.targets() {
            let x = q[j];
            if !x.is_finite() {
                out.push(format!("entry {j} is not finite"));
                continue;
            }
            if x < self.lo[j] - BOUND_TOL || x > self.hi[j] + BOUND_TOL {
                out.push(format!(
                    "entry {j} = {x} outside [{}, {}]",
                    self.lo[j], self.hi[j]
                ));
            }
            off += x;
        }
        if (q[self.state] + off).abs() > tol {
            out.push(format!("row sum {} != 0", q[self.state] + off));
        }
        out
    }

    pub fn contains(&self, q: &[f64], tol: f64) -> bool {
        self.violations(q, tol).is_empty()
    }

    /// Clamps off-diagonals into the box and restores the zero row sum.
    pub fn project(&self, q: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.dim()];
        let mut off = 0.0;
        for j in self.targets() {
            r[j] = q[j].clamp(self.lo[j], self.hi[j]);
            off += r[j];
        }
        r[self.state] = -off;
        r
    }

    /// For each off-diagonal coordinate, whether `q + ε(e_j - e_i)` and
    /// `q - ε(e_j - e_i)` stay feasible for small ε > 0.
    pub fn feasible_directions(&self, q: &[f64]) -> Result<Vec<DirectionFeasibility>> {
        let v = self.violations(q, 1e-12);
        if !v.is_empty() {
            return Err(Error::InfeasibleRow {
                state: self.state,
                reason: v.join("; "),
            });
        }
        Ok(self
            .targets()
            .map(|j| DirectionFeasibility {
                target: j,
                increase: q[j] < self.hi[j] - BOUND_TOL,
                decrease: q[j] > self.lo[j] + BOUND_TOL,
            })
            .collect())
    }
}

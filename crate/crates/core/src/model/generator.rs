use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Generator (rate matrix) of a finite-state continuous-time Markov chain.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorMatrix(DMatrix<f64>);

impl GeneratorMatrix {
    /// Wraps rows verbatim; use [`GeneratorMatrix::from_off_diagonal`] to have
    /// the diagonal filled in.
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
        Ok(GeneratorMatrix(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }

    /// Uses the off-diagonal entries of `rows` and sets `q_ii = -Σ_{j≠i} q_ij`.
    pub fn from_off_diagonal(rows: &[Vec<f64>]) -> Result<Self> {
        let mut q = Self::from_rows(rows)?;
        q.fix_diagonal();
        Ok(q)
    }

    pub fn zeros(n: usize) -> Self {
        GeneratorMatrix(DMatrix::zeros(n, n))
    }

    /// Two-state generator `[[-a, a], [b, -b]]`.
    pub fn two_state(a: f64, b: f64) -> Self {
        GeneratorMatrix(DMatrix::from_row_slice(2, 2, &[-a, a, b, -b]))
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

    pub fn set_row(&mut self, i: usize, q: &[f64]) {
        for (j, &v) in q.iter().enumerate() {
            self.0[(i, j)] = v;
        }
    }

    pub fn with_row(&self, i: usize, q: &[f64]) -> Self {
        let mut c = self.clone();
        c.set_row(i, q);
        c
    }

    pub fn fix_diagonal(&mut self) {
        for i in 0..self.n() {
            let off: f64 = (0..self.n())
                .filter(|&j| j != i)
                .map(|j| self.0[(i, j)])
                .sum();
            self.0[(i, i)] = -off;
        }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &GeneratorMatrix) -> f64 {
        (&self.0 - &other.0).amax()
    }

    /// Checks sign and row-sum structure only (no admissible boxes).
    pub fn check_structure(&self, row_sum_tol: f64) -> Result<()> {
        let mut bad = Vec::new();
        for i in 0..self.n() {
            let mut s = 0.0;
            for j in 0..self.n() {
                let v = self.0[(i, j)];
                if !v.is_finite() {
                    bad.push(super::Violation::NonFinite { i, j });
                } else if i != j && v < 0.0 {
                    bad.push(super::Violation::NegativeOffDiagonal { i, j, value: v });
                }
                s += v;
            }
            if s.abs() > row_sum_tol {
                bad.push(super::Violation::RowSum { i, sum: s });
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGenerator(bad))
        }
    }
}

impl Serialize for GeneratorMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GeneratorMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        GeneratorMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_reconstruction() {
        let q = GeneratorMatrix::from_off_diagonal(&[
            vec![9.0, 0.1, 0.2],
            vec![0.3, 9.0, 0.0],
            vec![0.7, 1e-3, 9.0],
        ])
        .unwrap();
        for i in 0..3 {
            let off: f64 = (0..3).filter(|&j| j != i).map(|j| q.get(i, j)).sum();
            assert_eq!(q.get(i, i), -off);
        }
        assert!(q.check_structure(1e-12).is_ok());
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(GeneratorMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0]]).is_err());
    }
}

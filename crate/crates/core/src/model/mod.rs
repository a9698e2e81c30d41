//! Domain types: generators, admissible sets, discounts, running payoffs.

mod admissible;
mod discount;
mod generator;
mod poly;
mod running;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use admissible::{AdmissibleRowSet, DirectionFeasibility, BOUND_TOL};
pub use discount::{DiscountSpec, GenericDiscount, DEFAULT_WEIGHT_SUM_TOL};
pub use generator::GeneratorMatrix;
pub use poly::{PiecewisePoly, Poly};
pub use running::{RowPayoff, RunningPayoff};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    n_states: usize,
}

impl StateSpace {
    pub fn new(n_states: usize) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::model("states", "need at least one state"));
        }
        Ok(StateSpace { n_states })
    }

    pub fn len(&self) -> usize {
        self.n_states
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Validation constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub row_sum: f64,
    pub weight_sum: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            row_sum: 1e-12,
            weight_sum: DEFAULT_WEIGHT_SUM_TOL,
        }
    }
}

/// A complete control problem: `F(i, Q) = E_i ∫ δ(t) g(X_t, Q_{X_t}) dt`.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    states: StateSpace,
    discount: DiscountSpec,
    payoff: RunningPayoff,
    constraints: Vec<AdmissibleRowSet>,
    tolerances: Tolerances,
}

impl ModelSpec {
    pub fn new(
        discount: DiscountSpec,
        payoff: RunningPayoff,
        constraints: Vec<AdmissibleRowSet>,
    ) -> Result<Self> {
        Self::with_tolerances(discount, payoff, constraints, Tolerances::default())
    }

    pub fn with_tolerances(
        discount: DiscountSpec,
        payoff: RunningPayoff,
        constraints: Vec<AdmissibleRowSet>,
        tolerances: Tolerances,
    ) -> Result<Self> {
        let states = StateSpace::new(payoff.n_states())?;
        let n = states.len();
        discount.validate(tolerances.weight_sum)?;
        if constraints.len() != n {
            return Err(Error::model(
                "boxes",
                format!("{} row sets for {n} states", constraints.len()),
            ));
        }
        for (i, c) in constraints.iter().enumerate() {
            if c.state() != i || c.dim() != n {
                return Err(Error::model(
                    format!("boxes[{i}]"),
                    format!("row set for state {} of dimension {}", c.state(), c.dim()),
                ));
            }
            for j in c.targets() {
                if let Some(p) = payoff.row(i).term(j) {
                    let (lo, hi) = p.domain();
                    if c.lo(j) < lo || c.hi(j) > hi {
                        return Err(Error::model(
                            format!("rows[{i}].terms[{j}].domain"),
                            format!(
                                "payoff domain [{lo}, {hi}] does not cover box [{}, {}]",
                                c.lo(j),
                                c.hi(j)
                            ),
                        ));
                    }
                }
            }
        }
        Ok(ModelSpec {
            states,
            discount,
            payoff,
            constraints,
            tolerances,
        })
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> StateSpace {
        self.states
    }

    pub fn discount(&self) -> &DiscountSpec {
        &self.discount
    }

    pub fn payoff(&self) -> &RunningPayoff {
        &self.payoff
    }

    pub fn constraints(&self) -> &[AdmissibleRowSet] {
        &self.constraints
    }

    pub fn row_set(&self, i: usize) -> &AdmissibleRowSet {
        &self.constraints[i]
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances
    }

    /// Same model with every `g_i` multiplied by `c`.
    pub fn scaled_payoff(&self, c: f64) -> Result<Self> {
        let mut rows = Vec::with_capacity(self.n());
        for r in self.payoff.rows() {
            let mut terms = Vec::with_capacity(r.terms.len());
            for t in &r.terms {
                terms.push(match t {
                    Some(p) => {
                        let (lo, hi) = p.domain();
                        let pieces = p
                            .pieces()
                            .iter()
                            .map(|q| Poly::new(q.coeffs().iter().map(|v| v * c).collect()))
                            .collect();
                        Some(PiecewisePoly::new(lo, hi, p.knots().to_vec(), pieces)?)
                    }
                    None => None,
                });
            }
            rows.push(RowPayoff {
                constant: r.constant * c,
                terms,
            });
        }
        ModelSpec::with_tolerances(
            self.discount.clone(),
            RunningPayoff::new(rows)?,
            self.constraints.clone(),
            self.tolerances,
        )
    }

    /// Whether all admissible boxes have finite upper bounds.
    pub fn is_compact(&self) -> bool {
        self.constraints.iter().all(|c| c.is_bounded())
    }

    /// Whether every `g_i` is concave over its box (sampled check).
    pub fn is_concave(&self) -> bool {
        let limits: Vec<Vec<f64>> = self
            .constraints
            .iter()
            .map(|c| (0..self.n()).map(|j| c.hi(j).min(1e6)).collect())
            .collect();
        self.payoff.is_concave(&limits)
    }

    /// `g(Q) = (g_1(Q_1), …, g_N(Q_N))`.
    pub fn payoff_rates(&self, q: &GeneratorMatrix) -> Result<Vec<f64>> {
        (0..self.n())
            .map(|i| self.payoff.value(i, &q.row(i)))
            .collect()
    }

    /// Lower corner of every box, a convenient feasible generator.
    pub fn lower_corner(&self) -> GeneratorMatrix {
        let rows: Vec<Vec<f64>> = self
            .constraints
            .iter()
            .map(|c| {
                (0..self.n())
                    .map(|j| if j == c.state() { 0.0 } else { c.lo(j) })
                    .collect()
            })
            .collect();
        GeneratorMatrix::from_off_diagonal(&rows).expect("square by construction")
    }
}

/// One failed generator invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Dimension {
        expected: usize,
        found: usize,
    },
    NonFinite {
        i: usize,
        j: usize,
    },
    NegativeOffDiagonal {
        i: usize,
        j: usize,
        value: f64,
    },
    RowSum {
        i: usize,
        sum: f64,
    },
    OutOfBox {
        i: usize,
        j: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // States are reported 1-based, matching config files.
        match *self {
            Violation::Dimension { expected, found } => {
                write!(
                    f,
                    "generator is {found}x{found}, model has {expected} states"
                )
            }
            Violation::NonFinite { i, j } => write!(f, "q[{}][{}] is not finite", i + 1, j + 1),
            Violation::NegativeOffDiagonal { i, j, value } => {
                write!(
                    f,
                    "off-diagonal q[{}][{}] = {value} is negative",
                    i + 1,
                    j + 1
                )
            }
            Violation::RowSum { i, sum } => write!(f, "row {} sums to {sum:e}, not 0", i + 1),
            Violation::OutOfBox {
                i,
                j,
                value,
                lo,
                hi,
            } => write!(
                f,
                "q[{}][{}] = {value} outside admissible box [{lo}, {hi}]",
                i + 1,
                j + 1
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationVerdict {
    pub violations: Vec<Violation>,
}

impl ValidationVerdict {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidGenerator(self.violations))
        }
    }
}

/// Lists every violated generator invariant for `q` under `model`.
pub fn validate_generator(model: &ModelSpec, q: &GeneratorMatrix) -> ValidationVerdict {
    let n = model.n();
    let mut violations = Vec::new();
    if q.n() != n {
        violations.push(Violation::Dimension {
            expected: n,
            found: q.n(),
        });
        return ValidationVerdict { violations };
    }
    let tol = model.tolerances().row_sum;
    for i in 0..n {
        let row = q.row(i);
        let set = model.row_set(i);
        let mut sum = 0.0;
        let mut finite = true;
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                violations.push(Violation::NonFinite { i, j });
                finite = false;
                continue;
            }
            sum += v;
            if j == i {
                continue;
            }
            if v < 0.0 {
                violations.push(Violation::NegativeOffDiagonal { i, j, value: v });
            } else if v < set.lo(j) - BOUND_TOL || v > set.hi(j) + BOUND_TOL {
                violations.push(Violation::OutOfBox {
                    i,
                    j,
                    value: v,
                    lo: set.lo(j),
                    hi: set.hi(j),
                });
            }
        }
        if finite && sum.abs() > tol {
            violations.push(Violation::RowSum { i, sum });
        }
    }
    ValidationVerdict { violations }
}

/// Feasible one-sided directions at row `q` of the given row set.
pub fn feasible_directions(
    row_set: &AdmissibleRowSet,
    q: &[f64],
) -> Result<Vec<DirectionFeasibility>> {
    row_set.feasible_directions(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(hi: f64) -> ModelSpec {
        let p = PiecewisePoly::single(0.0, f64::INFINITY, Poly::new(vec![0.0, 0.0, -1.0]));
        ModelSpec::new(
            DiscountSpec::pseudo_exponential(0.5, 1.0, 2.0).unwrap(),
            RunningPayoff::new(vec![
                RowPayoff {
                    constant: 0.0,
                    terms: vec![None, Some(p.clone())],
                },
                RowPayoff {
                    constant: 0.0,
                    terms: vec![Some(p), None],
                },
            ])
            .unwrap(),
            vec![
                AdmissibleRowSet::uniform(0, 2, hi).unwrap(),
                AdmissibleRowSet::uniform(1, 2, hi).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn two_state_form_is_valid() {
        let m = two_state(2.0);
        assert!(validate_generator(&m, &GeneratorMatrix::two_state(0.3, 1.2)).is_valid());
        assert!(validate_generator(&m, &GeneratorMatrix::two_state(0.0, 2.0)).is_valid());
    }

    #[test]
    fn negative_rate_reported_with_indices() {
        let m = two_state(2.0);
        let q = GeneratorMatrix::from_rows(&[vec![0.1, -0.1], vec![0.5, -0.5]]).unwrap();
        let v = validate_generator(&m, &q);
        assert_eq!(
            v.violations,
            vec![Violation::NegativeOffDiagonal {
                i: 0,
                j: 1,
                value: -0.1
            }]
        );
        assert!(v.violations[0].to_string().contains("q[1][2]"));
    }

    #[test]
    fn row_sum_violation_reported() {
        let p = PiecewisePoly::single(0.0, 10.0, Poly::zero());
        let rows = (0..3)
            .map(|i| RowPayoff {
                constant: 0.0,
                terms: (0..3).map(|j| (j != i).then(|| p.clone())).collect(),
            })
            .collect();
        let m = ModelSpec::new(
            DiscountSpec::exponential(1.0).unwrap(),
            RunningPayoff::new(rows).unwrap(),
            (0..3)
                .map(|i| AdmissibleRowSet::uniform(i, 3, 5.0).unwrap())
                .collect(),
        )
        .unwrap();
        let q = GeneratorMatrix::from_rows(&[
            vec![-1.0, 0.5, 0.5],
            vec![0.2, -0.4 + 1e-6, 0.2],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let v = validate_generator(&m, &q);
        assert_eq!(v.violations.len(), 1);
        assert!(matches!(v.violations[0], Violation::RowSum { i: 1, .. }));
    }

    #[test]
    fn box_violation_reported() {
        let m = two_state(1.0);
        let v = validate_generator(&m, &GeneratorMatrix::two_state(1.5, 0.5));
        assert!(matches!(
            v.violations[..],
            [Violation::OutOfBox { i: 0, j: 1, .. }]
        ));
    }

    #[test]
    fn payoff_domain_must_cover_box() {
        let p = PiecewisePoly::single(0.0, 1.0, Poly::zero());
        let r = ModelSpec::new(
            DiscountSpec::exponential(1.0).unwrap(),
            RunningPayoff::new(vec![
                RowPayoff {
                    constant: 0.0,
                    terms: vec![None, Some(p)],
                },
                RowPayoff::constant(2, 0.0),
            ])
            .unwrap(),
            vec![
                AdmissibleRowSet::uniform(0, 2, 2.0).unwrap(),
                AdmissibleRowSet::uniform(1, 2, 2.0).unwrap(),
            ],
        );
        assert!(r.is_err());
    }
}

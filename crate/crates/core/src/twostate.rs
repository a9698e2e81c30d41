//! Two-state models `Q ∼ (a, b)` under `δ(t) = λ e^{-ρt} + (1-λ) e^{-ρ't}`.
//!
//! Everything here is written out by hand from the two-state transition law
//! and does not call into [`crate::payoff`] or [`crate::equilibrium`], so the
//! general machinery can be tested against it.

use serde::{Deserialize, Serialize};

use crate::equilibrium::Verdict;
use crate::error::{Error, Result};
use crate::model::{
    AdmissibleRowSet, DiscountSpec, GeneratorMatrix, ModelSpec, PiecewisePoly, Poly, RowPayoff,
    RunningPayoff,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStateModel {
    pub lambda: f64,
    pub rho: f64,
    pub rho_prime: f64,
    /// Payoff in state 1 as a function of `a = q₁₂`.
    pub g1: PiecewisePoly,
    /// Payoff in state 2 as a function of `b = q₂₁`.
    pub g2: PiecewisePoly,
    pub a_box: (f64, f64),
    pub b_box: (f64, f64),
}

impl TwoStateModel {
    pub fn new(
        lambda: f64,
        rho: f64,
        rho_prime: f64,
        g1: PiecewisePoly,
        g2: PiecewisePoly,
        a_box: (f64, f64),
        b_box: (f64, f64),
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::model("lambda", "must lie in (0, 1)"));
        }
        if !(rho > 0.0 && rho_prime > 0.0 && rho.is_finite() && rho_prime.is_finite()) {
            return Err(Error::model(
                "rates",
                "ρ and ρ' must be positive and finite",
            ));
        }
        let m = TwoStateModel {
            lambda,
            rho,
            rho_prime,
            g1,
            g2,
            a_box,
            b_box,
        };
        // Validates boxes against payoff domains.
        m.to_model_spec()?;
        Ok(m)
    }

    /// The same problem as a general [`ModelSpec`].
    pub fn to_model_spec(&self) -> Result<ModelSpec> {
        let discount = DiscountSpec::pseudo_exponential(self.lambda, self.rho, self.rho_prime)?;
        let payoff = RunningPayoff::new(vec![
            RowPayoff {
                constant: 0.0,
                terms: vec![None, Some(self.g1.clone())],
            },
            RowPayoff {
                constant: 0.0,
                terms: vec![Some(self.g2.clone()), None],
            },
        ])?;
        let boxes = vec![
            AdmissibleRowSet::new(0, vec![0.0, self.a_box.0], vec![0.0, self.a_box.1])?,
            AdmissibleRowSet::new(1, vec![self.b_box.0, 0.0], vec![self.b_box.1, 0.0])?,
        ];
        ModelSpec::new(discount, payoff, boxes)
    }

    pub fn generator(a: f64, b: f64) -> GeneratorMatrix {
        GeneratorMatrix::two_state(a, b)
    }

    pub fn g1(&self, a: f64) -> Result<f64> {
        self.g1.value(a)
    }

    pub fn g2(&self, b: f64) -> Result<f64> {
        self.g2.value(b)
    }

    fn check(a: f64, b: f64) -> Result<()> {
        if a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite() {
            Ok(())
        } else {
            Err(Error::InfeasibleRow {
                state: if a >= 0.0 { 1 } else { 0 },
                reason: format!("rates ({a}, {b}) must be finite and nonnegative"),
            })
        }
    }

    /// `(F₁^φ, F₂^φ)`: payoffs under the single exponential `e^{-φt}`.
    pub fn f_phi(&self, phi: f64, a: f64, b: f64) -> Result<[f64; 2]> {
        Self::check(a, b)?;
        let gamma = a + b;
        // With no transitions both states are absorbing; any α + β = 1 works.
        let (alpha, beta) = if gamma > 0.0 {
            (b / gamma, a / gamma)
        } else {
            (0.5, 0.5)
        };
        let (g1, g2) = (self.g1(a)?, self.g2(b)?);
        let f1 =
            (alpha / phi + beta / (phi + gamma)) * g1 + (beta / phi - beta / (phi + gamma)) * g2;
        let f2 =
            (alpha / phi - alpha / (phi + gamma)) * g1 + (beta / phi + alpha / (phi + gamma)) * g2;
        Ok([f1, f2])
    }

    /// `(F₁, F₂)` at `Q ∼ (a, b)`.
    pub fn f_values(&self, a: f64, b: f64) -> Result<[f64; 2]> {
        let r = self.f_phi(self.rho, a, b)?;
        let s = self.f_phi(self.rho_prime, a, b)?;
        let l = self.lambda;
        Ok([l * r[0] + (1.0 - l) * s[0], l * r[1] + (1.0 - l) * s[1]])
    }

    /// `(G₁, G₂)` at `Q ∼ (a, b)`.
    pub fn g_values(&self, a: f64, b: f64) -> Result<[f64; 2]> {
        let r = self.f_phi(self.rho, a, b)?;
        let s = self.f_phi(self.rho_prime, a, b)?;
        let (l, p, pp) = (self.lambda, self.rho, self.rho_prime);
        Ok([
            -p * l * r[0] - pp * (1.0 - l) * s[0],
            -p * l * r[1] - pp * (1.0 - l) * s[1],
        ])
    }

    /// `F₁ − F₂`.
    pub fn f_gap(&self, a: f64, b: f64) -> Result<f64> {
        Self::check(a, b)?;
        let s = a + b;
        let w = self.lambda / (self.rho + s) + (1.0 - self.lambda) / (self.rho_prime + s);
        Ok(w * (self.g1(a)? - self.g2(b)?))
    }

    /// `G₁ − G₂`.
    pub fn g_gap(&self, a: f64, b: f64) -> Result<f64> {
        Self::check(a, b)?;
        let s = a + b;
        let w = self.rho * self.lambda / (self.rho + s)
            + self.rho_prime * (1.0 - self.lambda) / (self.rho_prime + s);
        Ok(-w * (self.g1(a)? - self.g2(b)?))
    }

    /// `δ'(0) = −(ρλ + ρ'(1−λ))`.
    pub fn dprime0(&self) -> f64 {
        -(self.rho * self.lambda + self.rho_prime * (1.0 - self.lambda))
    }

    /// `Γ₁(a)` against the baseline `(a*, b*)`.
    pub fn gamma1(&self, a: f64, astar: f64, bstar: f64) -> Result<f64> {
        Ok(self.g1(a)? - a * self.f_gap(astar, bstar)?)
    }

    /// `Γ₂(b)` against the baseline `(a*, b*)`.
    pub fn gamma2(&self, b: f64, astar: f64, bstar: f64) -> Result<f64> {
        Ok(self.g2(b)? + b * self.f_gap(astar, bstar)?)
    }

    /// `Λ(1, Q)` for `Q ∼ (a, b)` against `(a*, b*)`.
    pub fn lambda1(&self, a: f64, b: f64, astar: f64, bstar: f64) -> Result<f64> {
        let d = self.f_gap(astar, bstar)?;
        let e = self.g_gap(astar, bstar)?;
        let g1 = self.g1(a)?;
        Ok(-2.0 * a * e - a * (g1 - self.g2(b)?) + self.dprime0() * g1 + (a * a + a * b) * d)
    }

    /// `Λ(2, Q)` for `Q ∼ (a, b)` against `(a*, b*)`.
    pub fn lambda2(&self, a: f64, b: f64, astar: f64, bstar: f64) -> Result<f64> {
        let d = self.f_gap(astar, bstar)?;
        let e = self.g_gap(astar, bstar)?;
        let g2 = self.g2(b)?;
        Ok(2.0 * b * e + b * (self.g1(a)? - g2) + self.dprime0() * g2 - (b * b + a * b) * d)
    }

    /// First-order residuals `(g₁'(a) − (F₁−F₂), g₂'(b) + (F₁−F₂))` at `(a, b)`.
    pub fn first_order_residuals(&self, a: f64, b: f64) -> Result<[f64; 2]> {
        let d = self.f_gap(a, b)?;
        Ok([self.g1.derivative(a)? - d, self.g2.derivative(b)? + d])
    }
}

/// Where an expected number comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Stated in the published worked example.
    Published,
    /// Obtained by evaluating published formulas, or by an independent oracle.
    Derived,
    /// True by construction.
    Definitional,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpectedEquilibrium {
    pub a: f64,
    pub b: f64,
    pub verdict: Verdict,
    pub source: Source,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpectedValue {
    pub name: String,
    pub value: f64,
    pub source: Source,
}

impl ExpectedValue {
    fn new(name: &str, value: f64, source: Source) -> Self {
        ExpectedValue {
            name: name.into(),
            value,
            source,
        }
    }
}

/// Built-in example with its manifest of expected outcomes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub summary: String,
    pub model: TwoStateModel,
    pub equilibria: Vec<ExpectedEquilibrium>,
    pub values: Vec<ExpectedValue>,
    /// Mesh sizes for the discrete-time experiment, when there is one.
    pub meshes: Vec<f64>,
}

impl Example {
    pub fn value(&self, name: &str) -> Option<&ExpectedValue> {
        self.values.iter().find(|v| v.name == name)
    }
}

pub const EXAMPLE_IDS: [&str; 5] = ["eg41", "eg42", "eg43", "eg51", "eg52"];

/// Upper rate bound used for every built-in box.
pub const BUILTIN_RATE_CAP: f64 = 4.0;

fn poly(c: &[f64]) -> PiecewisePoly {
    PiecewisePoly::single(0.0, f64::INFINITY, Poly::new(c.to_vec()))
}

fn standard(g1: PiecewisePoly, g2: PiecewisePoly, cap: f64) -> TwoStateModel {
    TwoStateModel::new(0.5, 1.0, 2.0, g1, g2, (0.0, cap), (0.0, cap))
        .expect("built-in parameters are valid")
}

/// Looks up a built-in example; `eg51` uses `k = 1`.
pub fn builtin(id: &str) -> Result<Example> {
    match id {
        "eg41" => Ok(eg41()),
        "eg42" => Ok(eg42()),
        "eg43" => Ok(eg43()),
        "eg51" => Ok(eg51(1.0)),
        "eg52" => Ok(eg52()),
        _ => Err(Error::UnknownExample(id.to_string())),
    }
}

fn eg41_model() -> TwoStateModel {
    standard(
        poly(&[0.0, 0.0, -1.0]),
        poly(&[1.0, 2.0, -1.0]),
        BUILTIN_RATE_CAP,
    )
}

fn eg41() -> Example {
    use Source::*;
    Example {
        id: "eg41".into(),
        summary: "g1 = -a², g2 = 2 - (1-b)²: unique interior equilibrium, strong".into(),
        model: eg41_model(),
        equilibria: vec![ExpectedEquilibrium {
            a: 5.0 / 12.0,
            b: 7.0 / 12.0,
            verdict: Verdict::Strong,
            source: Published,
        }],
        values: vec![
            ExpectedValue::new("f_gap_at_equilibrium", -5.0 / 6.0, Derived),
            ExpectedValue::new("g_gap_at_equilibrium", 7.0 / 6.0, Derived),
        ],
        meshes: Vec::new(),
    }
}

/// Left side of the equation fixing `a*` in the boundary example.
pub fn eg42_equation(a: f64) -> f64 {
    -2.0 * a + 0.5 * (1.0 / (a + 1.0) + 1.0 / (a + 2.0)) * (a * a + 2.0)
}

/// Root of [`eg42_equation`] on `(0, 1)` by bisection.
pub fn eg42_astar() -> f64 {
    bisect(eg42_equation, 0.0, 1.0)
}

fn eg42() -> Example {
    use Source::*;
    let a = eg42_astar();
    Example {
        id: "eg42".into(),
        summary: "g1 = -a², g2 = 2 - b²: equilibrium on the boundary b = 0, strong".into(),
        model: standard(
            poly(&[0.0, 0.0, -1.0]),
            poly(&[2.0, 0.0, -1.0]),
            BUILTIN_RATE_CAP,
        ),
        equilibria: vec![ExpectedEquilibrium {
            a,
            b: 0.0,
            verdict: Verdict::Strong,
            source: Published,
        }],
        values: vec![
            ExpectedValue::new("astar", a, Derived),
            ExpectedValue::new("astar_lower", 0.59, Derived),
            ExpectedValue::new("astar_upper", 0.60, Derived),
        ],
        meshes: Vec::new(),
    }
}

/// The C¹ payoff of state 2 in the two-equilibrium example: linear with
/// slope 5/6 below 7/12, then `2 − (1−b)²`.
pub fn eg43_g2() -> PiecewisePoly {
    PiecewisePoly::new(
        0.0,
        f64::INFINITY,
        vec![7.0 / 12.0],
        vec![
            Poly::new(vec![193.0 / 144.0, 5.0 / 6.0]),
            Poly::new(vec![1.0, 2.0, -1.0]),
        ],
    )
    .expect("pieces meet at the knot")
}

/// `ā` solves `ā = −½ (F₁ − F₂)(ā, 0)`, i.e. `Γ₁` against `(ā, 0)` peaks at `ā`.
pub fn eg43_abar_equation(a: f64) -> f64 {
    a - 0.25 * (1.0 / (1.0 + a) + 1.0 / (2.0 + a)) * (a * a + 193.0 / 144.0)
}

pub fn eg43_abar() -> f64 {
    bisect(eg43_abar_equation, 0.0, 1.0)
}

fn eg43() -> Example {
    use Source::*;
    let abar = eg43_abar();
    Example {
        id: "eg43".into(),
        summary: "g1 = -a², g2 piecewise C¹ with a flat Γ₂: one weak-not-strong and one strong equilibrium"
            .into(),
        model: standard(poly(&[0.0, 0.0, -1.0]), eg43_g2(), BUILTIN_RATE_CAP),
        equilibria: vec![
            ExpectedEquilibrium {
                a: 5.0 / 12.0,
                b: 7.0 / 12.0,
                verdict: Verdict::WeakNotStrong,
                source: Published,
            },
            ExpectedEquilibrium {
                a: abar,
                b: 0.0,
                verdict: Verdict::Strong,
                source: Published,
            },
        ],
        values: vec![
            ExpectedValue::new("abar", abar, Derived),
            ExpectedValue::new("abar_published", 0.42364, Published),
            ExpectedValue::new("lambda_bar_slope", -1.0 / 12.0, Published),
            ExpectedValue::new("lambda_bar_intercept", -579.0 / 288.0, Published),
            ExpectedValue::new("lambda_bar_at_equilibrium", -593.0 / 288.0, Derived),
            ExpectedValue::new("probe_coefficient", -7.0 / 288.0, Derived),
        ],
        meshes: Vec::new(),
    }
}

/// `g₁(a) = −¼a⁴ + k a³ − k² a² − ¾ a − 1`, `g₂ ≡ 0`.
pub fn eg51_model(k: f64) -> TwoStateModel {
    let cap = BUILTIN_RATE_CAP.max(4.0 * k);
    standard(poly(&[-1.0, -0.75, -k * k, k, -0.25]), poly(&[0.0]), cap)
}

/// The weak-not-strong example with parameter `k > 0`.
pub fn eg51(k: f64) -> Example {
    use Source::*;
    Example {
        id: "eg51".into(),
        summary: format!(
            "g1 quartic with k = {k}, g2 = 0: (0,0) is weak but not strong, and is the discrete limit"
        ),
        model: eg51_model(k),
        equilibria: vec![ExpectedEquilibrium {
            a: 0.0,
            b: 0.0,
            verdict: Verdict::WeakNotStrong,
            source: Published,
        }],
        values: vec![
            ExpectedValue::new("k", k, Definitional),
            ExpectedValue::new("f_gap_at_equilibrium", -0.75, Published),
            ExpectedValue::new("tie_rate", 2.0 * k, Published),
            ExpectedValue::new("lambda_at_equilibrium", 1.5, Published),
            ExpectedValue::new("lambda_at_deviation_published", 33.0 / 4.0 * k + 1.5, Published),
            ExpectedValue::new("lambda_at_deviation", k / 4.0 + 1.5, Derived),
            ExpectedValue::new("discrete_mesh", 0.01, Published),
        ],
        meshes: vec![0.1, 0.05, 0.02, 0.01],
    }
}

/// Closed-form discrete equilibrium `(α_n, β_n)` of the mesh experiment at mesh `δ`.
pub fn eg52_discrete_equilibrium(delta: f64) -> (f64, f64) {
    let e1 = (-delta).exp();
    let e2 = (-2.0 * delta).exp();
    let alpha =
        0.5 * delta * delta * (e1 / (1.0 - e1 * (1.0 - delta)) + e2 / (1.0 - e2 * (1.0 - delta)));
    (alpha, delta - alpha)
}

fn eg52() -> Example {
    use Source::*;
    let meshes = vec![0.1, 0.05, 0.02, 0.01];
    let mut values = Vec::new();
    for &d in &meshes {
        let (a, b) = eg52_discrete_equilibrium(d);
        values.push(ExpectedValue::new(&format!("alpha@{d}"), a, Published));
        values.push(ExpectedValue::new(&format!("beta@{d}"), b, Published));
    }
    Example {
        id: "eg52".into(),
        summary: "discretizations of eg41 converge to its strong equilibrium (5/12, 7/12)".into(),
        model: eg41_model(),
        equilibria: vec![ExpectedEquilibrium {
            a: 5.0 / 12.0,
            b: 7.0 / 12.0,
            verdict: Verdict::Strong,
            source: Published,
        }],
        values,
        meshes,
    }
}

/// Bisection for a sign change on `[lo, hi]`, to full double precision.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eg41_gaps() {
        let m = eg41().model;
        let (a, b) = (5.0 / 12.0, 7.0 / 12.0);
        assert_abs_diff_eq!(m.f_gap(a, b).unwrap(), -5.0 / 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.g_gap(a, b).unwrap(), 7.0 / 6.0, epsilon = 1e-14);
        let f = m.f_values(a, b).unwrap();
        assert_abs_diff_eq!(f[0] - f[1], -5.0 / 6.0, epsilon = 1e-14);
        let g = m.g_values(a, b).unwrap();
        assert_abs_diff_eq!(g[0] - g[1], 7.0 / 6.0, epsilon = 1e-14);
        let r = m.first_order_residuals(a, b).unwrap();
        assert_abs_diff_eq!(r[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn equal_constant_payoffs_have_no_gap() {
        let m = standard(poly(&[1.5]), poly(&[1.5]), 2.0);
        for (a, b) in [(0.0, 0.0), (0.3, 1.7), (2.0, 0.1)] {
            assert_eq!(m.f_gap(a, b).unwrap(), 0.0);
            assert_eq!(m.g_gap(a, b).unwrap(), 0.0);
        }
    }

    #[test]
    fn eg43_gamma_and_lambda() {
        let m = eg43().model;
        let (a, b) = (5.0 / 12.0, 7.0 / 12.0);
        for x in [0.0, 0.2, 0.7] {
            assert_abs_diff_eq!(
                m.gamma1(x, a, b).unwrap(),
                -x * x + 5.0 / 6.0 * x,
                epsilon = 1e-14
            );
        }
        for y in [0.0, 0.1, 0.5] {
            assert_abs_diff_eq!(m.gamma2(y, a, b).unwrap(), 193.0 / 144.0, epsilon = 1e-14);
            assert_abs_diff_eq!(
                m.lambda2(a, y, a, b).unwrap(),
                -y / 12.0 - 579.0 / 288.0,
                epsilon = 1e-13
            );
        }
        assert_abs_diff_eq!(
            m.lambda2(a, b, a, b).unwrap(),
            -593.0 / 288.0,
            epsilon = 1e-13
        );
        let abar = eg43_abar();
        assert!((abar - 0.42364).abs() < 5e-6);
        for x in [0.0, 0.3, 1.0] {
            assert_abs_diff_eq!(
                m.gamma1(x, abar, 0.0).unwrap(),
                -x * (x - 2.0 * abar),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn eg42_root_bracketed() {
        let a = eg42_astar();
        assert!(a > 0.59 && a < 0.60);
        assert!(eg42_equation(a).abs() < 1e-14);
        let m = eg42().model;
        let r = m.first_order_residuals(a, 0.0).unwrap();
        assert_abs_diff_eq!(r[0], 0.0, epsilon = 1e-12);
        assert!(r[1] <= 0.0);
    }

    #[test]
    fn eg51_values() {
        for k in [0.5, 1.0, 2.0] {
            let m = eg51_model(k);
            assert_abs_diff_eq!(m.f_gap(0.0, 0.0).unwrap(), -0.75, epsilon = 1e-15);
            assert_abs_diff_eq!(m.lambda1(0.0, 0.0, 0.0, 0.0).unwrap(), 1.5, epsilon = 1e-15);
            assert_abs_diff_eq!(
                m.lambda1(2.0 * k, 0.0, 0.0, 0.0).unwrap(),
                k / 4.0 + 1.5,
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                m.gamma1(2.0 * k, 0.0, 0.0).unwrap(),
                m.gamma1(0.0, 0.0, 0.0).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn eg52_mesh_rate() {
        for d in [0.1, 0.05, 0.01] {
            let (a, b) = eg52_discrete_equilibrium(d);
            assert!((a / d - 5.0 / 12.0).abs() <= d);
            assert_abs_diff_eq!(a + b, d, epsilon = 1e-16);
        }
    }

    #[test]
    fn unknown_id_rejected() {
        assert!(matches!(builtin("eg99"), Err(Error::UnknownExample(_))));
        for id in EXAMPLE_IDS {
            assert_eq!(builtin(id).unwrap().id, id);
        }
    }
}

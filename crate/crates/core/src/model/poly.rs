//! Univariate polynomials and piecewise polynomials with explicit knots.
//!
//! Running payoffs are assembled from these. A piecewise polynomial covers a
//! closed domain `[lo, hi]` (with `hi` possibly infinite); piece `k` is used on
//! `[knot_{k-1}, knot_k)` so a knot belongs to the piece on its right.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial with coefficients in ascending order of degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// `scale * self + slope * x`.
    pub fn affine_combination(&self, scale: f64, slope: f64) -> Poly {
        let mut c: Vec<f64> = self.coeffs.iter().map(|&v| v * scale).collect();
        if c.len() < 2 {
            c.resize(2, 0.0);
        }
        c[1] += slope;
        Poly::new(c)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Sum of absolute coefficients, used as a magnitude scale.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }
}

/// Relative tolerance for continuity of values at knots.
const KNOT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly {
    lo: f64,
    hi: f64,
    knots: Vec<f64>,
    pieces: Vec<Poly>,
    smooth: bool,
}

impl PiecewisePoly {
    /// Builds a piecewise polynomial. `pieces.len()` must equal `knots.len() + 1`,
    /// knots strictly increasing inside `(lo, hi)`, and adjacent pieces must agree
    /// in value at each knot.
    pub fn new(lo: f64, hi: f64, knots: Vec<f64>, pieces: Vec<Poly>) -> Result<Self> {
        if !(lo.is_finite() && lo <= hi) || hi.is_nan() {
            return Err(Error::model("domain", format!("bad domain [{lo}, {hi}]")));
        }
        if pieces.len() != knots.len() + 1 {
            return Err(Error::model(
                "pieces",
                format!("{} pieces for {} knots", pieces.len(), knots.len()),
            ));
        }
        if let Some(p) = pieces.iter().position(|p| !p.is_finite()) {
            return Err(Error::model(
                format!("pieces[{p}]"),
                "non-finite coefficient",
            ));
        }
        let mut prev = lo;
        for (k, &t) in knots.iter().enumerate() {
            if !(t > prev && t < hi) {
                return Err(Error::model(
                    format!("knots[{k}]"),
                    format!("knot {t} not strictly increasing inside ({lo}, {hi})"),
                ));
            }
            prev = t;
        }
        let mut smooth = true;
        for (k, &t) in knots.iter().enumerate() {
            let (l, r) = (&pieces[k], &pieces[k + 1]);
            let (vl, vr) = (l.eval(t), r.eval(t));
            let scale = 1.0 + vl.abs().max(vr.abs());
            if (vl - vr).abs() > KNOT_TOL * scale {
                return Err(Error::model(
                    format!("knots[{k}]"),
                    format!("pieces disagree at knot {t}: {vl} vs {vr}"),
                ));
            }
            let (dl, dr) = (l.derivative().eval(t), r.derivative().eval(t));
            if (dl - dr).abs() > KNOT_TOL * (1.0 + dl.abs().max(dr.abs())) {
                smooth = false;
            }
        }
        Ok(PiecewisePoly {
            lo,
            hi,
            knots,
            pieces,
            smooth,
        })
    }

    pub fn single(lo: f64, hi: f64, poly: Poly) -> Self {
        PiecewisePoly {
            lo,
            hi,
            knots: Vec::new(),
            pieces: vec![poly],
            smooth: true,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn pieces(&self) -> &[Poly] {
        &self.pieces
    }

    /// True when first derivatives also agree at every knot.
    pub fn is_c1(&self) -> bool {
        self.smooth
    }

    /// Interval covered by piece `k`, clipped to the domain.
    pub fn piece_interval(&self, k: usize) -> (f64, f64) {
        let a = if k == 0 { self.lo } else { self.knots[k - 1] };
        let b = if k == self.knots.len() {
            self.hi
        } else {
            self.knots[k]
        };
        (a, b)
    }

    pub fn piece_index(&self, x: f64) -> usize {
        self.knots.partition_point(|&t| t <= x)
    }

    fn check(&self, x: f64) -> Result<()> {
        // Slack of a few ulps so boundary points produced by arithmetic are accepted.
        let slack = 4.0 * f64::EPSILON * (1.0 + x.abs());
        if x.is_nan() || x < self.lo - slack || x > self.hi + slack {
            return Err(Error::OutsideDomain {
                x,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.pieces[self.piece_index(x)].eval(x))
    }

    /// Derivative; at a knot the right-hand piece is used.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.pieces[self.piece_index(x)].derivative().eval(x))
    }

    /// Checks concavity on `[lo, min(hi, probe_hi)]` by sampling second
    /// derivatives and slope jumps at knots.
    pub fn is_concave_on(&self, probe_hi: f64) -> bool {
        let top = self.hi.min(probe_hi);
        for (k, p) in self.pieces.iter().enumerate() {
            let (a, b) = self.piece_interval(k);
            let b = b.min(top);
            if a > b {
                continue;
            }
            let d2 = p.derivative().derivative();
            let scale = 1.0 + p.l1_norm();
            for s in 0..=64 {
                let x = a + (b - a) * s as f64 / 64.0;
                if d2.eval(x) > 1e-12 * scale {
                    return false;
                }
            }
        }
        for (k, &t) in self.knots.iter().enumerate() {
            let dl = self.pieces[k].derivative().eval(t);
            let dr = self.pieces[k + 1].derivative().eval(t);
            if dr > dl + 1e-12 * (1.0 + dl.abs()) {
                return false;
            }
        }
        true
    }
}

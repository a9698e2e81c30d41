//! Maximization of separable row objectives.
//!
//! Every row objective used here has the form
//! `c + Σ_j [s · p_j(x_j) + π_j x_j]` over a box, so it splits into
//! independent one-dimensional problems on piecewise polynomials. Each piece
//! contributes its endpoints and the sign changes (`+` to `−`) of its
//! derivative, located on a uniform grid and refined by bisection. Pieces whose
//! objective varies by less than the tie tolerance are reported as flat.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PiecewisePoly, Poly};

/// Grid intervals per polynomial piece.
pub const GRID_POINTS: usize = 512;

/// A connected part of the tie set of one coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TieComponent {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
    /// True when the component is an interval rather than a point.
    pub flat: bool,
}

impl TieComponent {
    pub fn is_point(&self) -> bool {
        !self.flat
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        x >= self.lo - slack && x <= self.hi + slack
    }

    /// Endpoints, midpoint and `samples` interior points (points give themselves).
    pub fn representatives(&self, samples: usize) -> Vec<f64> {
        if !self.flat {
            return vec![self.lo];
        }
        let hi = if self.hi.is_finite() {
            self.hi
        } else {
            self.lo + 1.0
        };
        let mut v = vec![self.lo, 0.5 * (self.lo + hi), hi];
        for s in 1..=samples {
            v.push(self.lo + (hi - self.lo) * s as f64 / (samples + 1) as f64);
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Candidate {
    lo: f64,
    hi: f64,
    value: f64,
    flat: bool,
}

/// One-dimensional objective `scale · p(x) + price · x` on `[lo, hi]`.
pub(crate) struct Objective1d<'a> {
    pub poly: Option<&'a PiecewisePoly>,
    pub scale: f64,
    pub price: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Objective1d<'_> {
    fn pieces(&self) -> Vec<(f64, f64, Poly)> {
        let zero = Poly::zero();
        let mut out = Vec::new();
        match self.poly {
            None => out.push((
                self.lo,
                self.hi,
                zero.affine_combination(self.scale, self.price),
            )),
            Some(p) => {
                for (k, piece) in p.pieces().iter().enumerate() {
                    let (a, b) = p.piece_interval(k);
                    let (a, b) = (a.max(self.lo), b.min(self.hi));
                    if a > b || (a == b && out.last().is_some_and(|l: &(f64, f64, Poly)| l.1 == a))
                    {
                        continue;
                    }
                    out.push((a, b, piece.affine_combination(self.scale, self.price)));
                }
            }
        }
        out
    }

    /// Candidate maximizers; `tau` decides which pieces count as flat.
    /// `state`/`target` are only used in the unbounded-objective error.
    pub fn candidates(&self, tau: f64, state: usize, target: usize) -> Result<Vec<Candidate>> {
        let mut out = Vec::new();
        for (a, b, h) in self.pieces() {
            piece_candidates(a, b, &h, tau, &mut out).map_err(|e| match e {
                Error::NoMaximum { .. } => Error::NoMaximum { state, target },
                other => other,
            })?;
        }
        Ok(out)
    }
}

fn piece_candidates(a: f64, b: f64, h: &Poly, tau: f64, out: &mut Vec<Candidate>) -> Result<()> {
    let point = |x: f64| Candidate {
        lo: x,
        hi: x,
        value: h.eval(x),
        flat: false,
    };
    if a == b {
        out.push(point(a));
        return Ok(());
    }
    let deg = h.degree();
    let b_eff = if b.is_finite() {
        b
    } else {
        let lead = h.coeffs()[deg];
        if deg == 0 {
            out.push(Candidate {
                lo: a,
                hi: b,
                value: h.eval(a),
                flat: true,
            });
            return Ok(());
        }
        if lead > 0.0 {
            return Err(Error::NoMaximum {
                state: 0,
                target: 0,
            });
        }
        // Past the Cauchy root bound of h' the objective only decreases.
        let d = h.derivative();
        let dc = d.coeffs();
        let dl = dc[dc.len() - 1];
        let bound = 1.0
            + dc[..dc.len() - 1]
                .iter()
                .map(|c| (c / dl).abs())
                .fold(0.0, f64::max);
        a.max(bound) + 1.0
    };
    let d = h.derivative();
    let step = (b_eff - a) / GRID_POINTS as f64;
    let xs: Vec<f64> = (0..=GRID_POINTS)
        .map(|k| {
            if k == GRID_POINTS {
                b_eff
            } else {
                a + step * k as f64
            }
        })
        .collect();
    let hs: Vec<f64> = xs.iter().map(|&x| h.eval(x)).collect();
    let (hmin, hmax) = hs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), &v| {
            (l.min(v), u.max(v))
        });
    if hmax - hmin <= tau {
        out.push(Candidate {
            lo: a,
            hi: b,
            value: hmax,
            flat: true,
        });
        return Ok(());
    }
    out.push(point(a));
    if b.is_finite() {
        out.push(point(b));
    }
    let ds: Vec<f64> = xs.iter().map(|&x| d.eval(x)).collect();
    for k in 1..xs.len() {
        let (dl, dr) = (ds[k - 1], ds[k]);
        if dl > 0.0 && dr < 0.0 {
            out.push(point(bisect_root(&d, xs[k - 1], xs[k])));
        } else if dr == 0.0 && k + 1 < xs.len() && dl > 0.0 && ds[k + 1] < 0.0 {
            out.push(point(xs[k]));
        }
    }
    Ok(())
}

/// Root of `d` in `[l, r]` with `d(l) > 0 > d(r)`.
fn bisect_root(d: &Poly, mut l: f64, mut r: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (l + r);
        if m <= l || m >= r {
            break;
        }
        let v = d.eval(m);
        if v > 0.0 {
            l = m;
        } else if v < 0.0 {
            r = m;
        } else {
            return m;
        }
    }
    0.5 * (l + r)
}

/// Maximum over candidates and the merged components within `tau` of it.
pub(crate) fn select_ties(cands: &[Candidate], tau: f64) -> (f64, Vec<TieComponent>) {
    let max = cands
        .iter()
        .map(|c| c.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut keep: Vec<Candidate> = cands
        .iter()
        .copied()
        .filter(|c| c.value >= max - tau)
        .collect();
    keep.sort_by(|x, y| x.lo.total_cmp(&y.lo).then(x.hi.total_cmp(&y.hi)));
    let mut comps: Vec<TieComponent> = Vec::new();
    for c in keep {
        if let Some(last) = comps.last_mut() {
            let touch = 1e-12 * (1.0 + last.hi.abs());
            if c.lo <= last.hi + touch {
                last.hi = last.hi.max(c.hi);
                last.value = last.value.max(c.value);
                last.flat = last.flat || c.flat || last.hi > last.lo;
                continue;
            }
        }
        comps.push(TieComponent {
            lo: c.lo,
            hi: c.hi,
            value: c.value,
            flat: c.flat,
        });
    }
    (max, comps)
}

/// Maximizes `scale · p(x) + price · x` on `[lo, hi]`.
pub fn maximize_1d(
    poly: Option<&PiecewisePoly>,
    scale: f64,
    price: f64,
    lo: f64,
    hi: f64,
    tau: f64,
) -> Result<(f64, Vec<TieComponent>)> {
    let obj = Objective1d {
        poly,
        scale,
        price,
        lo,
        hi,
    };
    let c = obj.candidates(tau, 0, 0)?;
    Ok(select_ties(&c, tau))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(c: Vec<f64>) -> PiecewisePoly {
        PiecewisePoly::single(0.0, f64::INFINITY, Poly::new(c))
    }

    #[test]
    fn interior_quadratic_maximum() {
        let p = pp(vec![0.0, 0.0, -1.0]);
        let (m, c) = maximize_1d(Some(&p), 1.0, 5.0 / 6.0, 0.0, 2.0, 1e-9).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].lo - 5.0 / 12.0).abs() < 1e-14);
        assert!((m - 25.0 / 144.0).abs() < 1e-15);
    }

    #[test]
    fn two_isolated_maximizers() {
        // -¼x⁴ + x³ - x² = -¼x²(x-2)², maximal at 0 and 2.
        let p = pp(vec![0.0, 0.0, -1.0, 1.0, -0.25]);
        let (_, c) = maximize_1d(Some(&p), 1.0, 0.0, 0.0, 4.0, 1e-9).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].lo, 0.0);
        assert!((c[1].lo - 2.0).abs() < 1e-12 && c[1].is_point());
    }

    #[test]
    fn flat_piece_reported_as_interval() {
        let p = PiecewisePoly::new(
            0.0,
            f64::INFINITY,
            vec![1.0],
            vec![Poly::new(vec![0.0, 1.0]), Poly::new(vec![-0.5, 2.0, -0.5])],
        )
        .unwrap();
        let (_, c) = maximize_1d(Some(&p), 1.0, -1.0, 0.0, 3.0, 1e-9).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c[0].flat);
        assert_eq!((c[0].lo, c[0].hi), (0.0, 1.0));
    }

    #[test]
    fn unbounded_objective_detected() {
        let p = pp(vec![0.0, 1.0]);
        assert!(matches!(
            maximize_1d(Some(&p), 1.0, 0.0, 0.0, f64::INFINITY, 1e-9),
            Err(Error::NoMaximum { .. })
        ));
        let q = pp(vec![0.0, 3.0, -1.0]);
        let (_, c) = maximize_1d(Some(&q), 1.0, 0.0, 0.0, f64::INFINITY, 1e-9).unwrap();
        assert!((c[0].lo - 1.5).abs() < 1e-13);
    }

    #[test]
    fn linear_objective_hits_a_bound() {
        let (_, c) = maximize_1d(None, 1.0, -2.0, 0.5, 3.0, 1e-9).unwrap();
        assert_eq!(c[0].lo, 0.5);
        let (_, c) = maximize_1d(None, 1.0, 2.0, 0.5, 3.0, 1e-9).unwrap();
        assert_eq!(c[0].lo, 3.0);
    }
}

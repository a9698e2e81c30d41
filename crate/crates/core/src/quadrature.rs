//! Globally adaptive Gauss–Kronrod (7/15) quadrature for vector integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_INTERVALS: usize = 4000;

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

fn gk15<F>(f: &F, a: f64, b: f64) -> Result<Panel>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let dim = fc.len();
    let mut k: Vec<f64> = fc.iter().map(|v| v * WGK[7]).collect();
    let mut g: Vec<f64> = fc.iter().map(|v| v * WG[3]).collect();
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x)?;
        let f2 = f(c + x)?;
        for d in 0..dim {
            let s = f1[d] + f2[d];
            k[d] += WGK[j] * s;
            if j % 2 == 1 {
                g[d] += WG[j / 2] * s;
            }
        }
    }
    let mut err: f64 = 0.0;
    for d in 0..dim {
        k[d] *= h;
        g[d] *= h;
        err = err.max((k[d] - g[d]).abs());
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("quadrature"));
    }
    Ok(Panel {
        a,
        b,
        value: k,
        err,
    })
}

/// Integrates a vector-valued `f` over `[a, b]` to absolute tolerance `tol`
/// (max-norm over components), starting from `panels` equal subintervals.
pub fn integrate_vec<F>(f: F, a: f64, b: f64, tol: f64, panels: usize) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    if b <= a {
        let dim = f(a)?.len();
        return Ok(vec![0.0; dim]);
    }
    let panels = panels.max(1);
    let mut heap = BinaryHeap::new();
    let w = (b - a) / panels as f64;
    for k in 0..panels {
        let lo = a + w * k as f64;
        let hi = if k + 1 == panels { b } else { lo + w };
        heap.push(gk15(&f, lo, hi)?);
    }
    loop {
        let total_err: f64 = heap.iter().map(|p| p.err).sum();
        if total_err <= tol || heap.len() >= MAX_INTERVALS {
            let dim = heap.peek().map(|p| p.value.len()).unwrap_or(0);
            let mut sum = vec![0.0; dim];
            // Sum in a fixed order for reproducibility.
            let mut all: Vec<Panel> = heap.into_vec();
            all.sort_by(|x, y| x.a.total_cmp(&y.a));
            for p in &all {
                for d in 0..dim {
                    sum[d] += p.value[d];
                }
            }
            if total_err > tol {
                return Err(Error::Quadrature {
                    tol,
                    estimate: total_err,
                });
            }
            return Ok(sum);
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            let estimate = worst.err;
            heap.push(Panel { err: 0.0, ..worst });
            if estimate > tol {
                return Err(Error::Quadrature { tol, estimate });
            }
            continue;
        }
        heap.push(gk15(&f, worst.a, mid)?);
        heap.push(gk15(&f, mid, worst.b)?);
    }
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_vec(|t| Ok(vec![f(t)]), a, b, tol, 8).map(|v| v[0])
}

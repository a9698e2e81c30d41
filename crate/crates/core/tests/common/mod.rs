#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strongeq::{
    AdmissibleRowSet, DiscountSpec, GeneratorMatrix, ModelSpec, PiecewisePoly, Poly, RowPayoff,
    RunningPayoff,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One to three exponential components with rates in `[0.3, 3]`.
pub fn random_mixture<R: Rng>(r: &mut R) -> DiscountSpec {
    let m = r.random_range(1..=3);
    let raw: Vec<f64> = (0..m).map(|_| r.random_range(0.2..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / s).collect();
    let rates = (0..m).map(|_| r.random_range(0.3..3.0)).collect();
    DiscountSpec::mixture(weights, rates).unwrap()
}

/// Shape of the random per-entry payoff terms.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// `c₀ + c₁x − c₂x²` with `c₂ ≥ 0.2`.
    Concave,
    /// Cubic with coefficients of either sign.
    Cubic,
}

fn random_term<R: Rng>(r: &mut R, shape: Shape) -> Poly {
    match shape {
        Shape::Concave => Poly::new(vec![
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..2.0),
            -r.random_range(0.2..2.0),
        ]),
        Shape::Cubic => Poly::new(vec![
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(-0.5..0.5),
        ]),
    }
}

/// Random model on `n` states with boxes `[0, hi]`, `hi ∈ [1, 3]`.
pub fn random_model<R: Rng>(r: &mut R, n: usize, shape: Shape) -> ModelSpec {
    let discount = random_mixture(r);
    let rows = (0..n)
        .map(|i| RowPayoff {
            constant: r.random_range(-1.0..1.0),
            terms: (0..n)
                .map(|j| {
                    (j != i)
                        .then(|| PiecewisePoly::single(0.0, f64::INFINITY, random_term(r, shape)))
                })
                .collect(),
        })
        .collect();
    let boxes = (0..n)
        .map(|i| AdmissibleRowSet::uniform(i, n, r.random_range(1.0..3.0)).unwrap())
        .collect();
    ModelSpec::new(discount, RunningPayoff::new(rows).unwrap(), boxes).unwrap()
}

/// A feasible row of state `i`, uniform in its box.
pub fn random_row<R: Rng>(r: &mut R, model: &ModelSpec, i: usize) -> Vec<f64> {
    let set = model.row_set(i);
    let mut q = vec![0.0; model.n()];
    for j in set.targets() {
        q[j] = r.random_range(set.lo(j)..=set.hi(j));
    }
    q[i] = -q.iter().sum::<f64>();
    q
}

pub fn random_generator<R: Rng>(r: &mut R, model: &ModelSpec) -> GeneratorMatrix {
    let rows: Vec<Vec<f64>> = (0..model.n()).map(|i| random_row(r, model, i)).collect();
    GeneratorMatrix::from_rows(&rows).unwrap()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Least-squares slope of `log|y|` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

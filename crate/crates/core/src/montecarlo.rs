//! Path simulation of the chain and Monte Carlo payoff estimates, used to
//! cross-check the resolvent evaluators.
//!
//! Every path draws from its own ChaCha stream (seed, path index), so results
//! do not depend on how paths are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_generator, DiscountSpec, GeneratorMatrix, ModelSpec};

/// Relative truncation bias allowed by the default horizon.
pub const DEFAULT_BIAS_REL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    /// Times at which the state changes, increasing.
    pub jump_times: Vec<f64>,
    /// `states[0]` is the initial state; `states[k+1]` is entered at `jump_times[k]`.
    pub states: Vec<usize>,
    pub horizon: f64,
}

impl PathSample {
    /// `(state, start, end)` for each constant stretch within the horizon.
    pub fn segments(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.states.iter().enumerate().map(|(k, &s)| {
            let start = if k == 0 { 0.0 } else { self.jump_times[k - 1] };
            let end = self.jump_times.get(k).copied().unwrap_or(self.horizon);
            (s, start, end)
        })
    }

    pub fn state_at(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|&s| s <= t);
        self.states[k]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub horizon: f64,
    /// Bound on `|E[truncated] − F|` from the discount tail.
    pub bias_bound: f64,
}

impl EstimatorResult {
    /// Whether `value` lies within `k` standard errors (plus the bias bound).
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error + self.bias_bound
    }
}

fn stream(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Continues a path under `q` from `(state, t0)` until `horizon`.
fn extend<R: Rng>(q: &GeneratorMatrix, path: &mut PathSample, t0: f64, horizon: f64, rng: &mut R) {
    let n = q.n();
    let mut t = t0;
    let mut s = *path.states.last().expect("paths start with a state");
    loop {
        let rate = -q.get(s, s);
        if rate <= 0.0 {
            break;
        }
        // 1 − U lies in (0, 1], so the logarithm is finite.
        let hold = -(1.0 - rng.random::<f64>()).ln() / rate;
        t += hold;
        if t >= horizon {
            break;
        }
        let mut pick = rng.random::<f64>() * rate;
        let mut next = s;
        for j in (0..n).filter(|&j| j != s) {
            let w = q.get(s, j);
            if w <= 0.0 {
                continue;
            }
            next = j;
            if pick < w {
                break;
            }
            pick -= w;
        }
        path.jump_times.push(t);
        path.states.push(next);
        s = next;
    }
    path.horizon = horizon;
}

fn check_start(q: &GeneratorMatrix, i0: usize, horizon: f64) -> Result<()> {
    q.check_structure(1e-10)?;
    if i0 >= q.n() {
        return Err(Error::Dimension {
            expected: q.n(),
            found: i0 + 1,
        });
    }
    if horizon.is_nan() || horizon <= 0.0 {
        return Err(Error::Unsupported("horizon must be positive".into()));
    }
    Ok(())
}

/// One path on `[0, horizon]`: `Exp(−q_ss)` holding times, jumps to `j` with
/// probability `q_sj / (−q_ss)`; rows with zero exit rate are absorbing.
pub fn simulate_path(
    q: &GeneratorMatrix,
    i0: usize,
    horizon: f64,
    seed: u64,
) -> Result<PathSample> {
    check_start(q, i0, horizon)?;
    let mut rng = stream(seed, 0);
    let mut p = PathSample {
        jump_times: Vec::new(),
        states: vec![i0],
        horizon,
    };
    extend(q, &mut p, 0.0, horizon, &mut rng);
    Ok(p)
}

/// `∫_s^e δ(t) dt` in closed form for exponential mixtures.
pub fn segment_integral(discount: &DiscountSpec, s: f64, e: f64) -> Result<f64> {
    let (w, r) = discount
        .components()
        .ok_or_else(|| Error::Unsupported("Monte Carlo requires an exponential mixture".into()))?;
    Ok(w.iter()
        .zip(r)
        .map(|(w, r)| -w * (-r * s).exp() * (-r * (e - s)).exp_m1() / r)
        .sum())
}

/// Horizon whose neglected tail is at most `rel` times the payoff scale,
/// with the resulting bias bound.
fn default_horizon(model: &ModelSpec, rates: &[f64], rel: f64) -> Result<(f64, f64)> {
    let d = model.discount();
    let mass = d
        .total_mass()
        .ok_or_else(|| Error::Unsupported("Monte Carlo requires an exponential mixture".into()))?;
    let sup = rates.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sup == 0.0 {
        return Ok((1.0, 0.0));
    }
    let h = d.horizon_for(sup, rel * sup * mass);
    Ok((h, sup * d.tail_mass(h)))
}

fn summarize(samples: &[f64], horizon: f64, bias_bound: f64) -> EstimatorResult {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    EstimatorResult {
        mean,
        std_error: (var / n).sqrt(),
        n_paths: samples.len(),
        horizon,
        bias_bound,
    }
}

/// Estimates `F(i0, Q)` by integrating `δ(t) g` exactly along simulated paths.
pub fn estimate_payoff(
    model: &ModelSpec,
    q: &GeneratorMatrix,
    i0: usize,
    n_paths: usize,
    seed: u64,
) -> Result<EstimatorResult> {
    validate_generator(model, q).into_result()?;
    let rates = model.payoff_rates(q)?;
    let (horizon, bias) = default_horizon(model, &rates, DEFAULT_BIAS_REL)?;
    check_start(q, i0, horizon)?;
    if n_paths == 0 {
        return Err(Error::Unsupported("need at least one path".into()));
    }
    let d = model.discount();
    let samples = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k);
            let mut p = PathSample {
                jump_times: Vec::new(),
                states: vec![i0],
                horizon,
            };
            extend(q, &mut p, 0.0, horizon, &mut rng);
            p.segments()
                .map(|(s, a, b)| Ok(rates[s] * segment_integral(d, a, b)?))
                .sum::<Result<f64>>()
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize(&samples, horizon, bias))
}

/// Estimates `F(i0, Q ⊗_ε Q*)`: the chain runs under `Q` on `[0, ε)` and
/// under `Q*` afterwards, earning `g(Q)` and `g(Q*)` respectively.
pub fn estimate_concat_payoff(
    model: &ModelSpec,
    i0: usize,
    q: &GeneratorMatrix,
    qstar: &GeneratorMatrix,
    eps: f64,
    n_paths: usize,
    seed: u64,
) -> Result<EstimatorResult> {
    validate_generator(model, q).into_result()?;
    validate_generator(model, qstar).into_result()?;
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::Unsupported("ε must be nonnegative".into()));
    }
    let r_dev = model.payoff_rates(q)?;
    let r_star = model.payoff_rates(qstar)?;
    let all: Vec<f64> = r_dev.iter().chain(&r_star).copied().collect();
    let (h, bias) = default_horizon(model, &all, DEFAULT_BIAS_REL)?;
    let horizon = h.max(eps);
    check_start(q, i0, horizon)?;
    if n_paths == 0 {
        return Err(Error::Unsupported("need at least one path".into()));
    }
    let d = model.discount();
    let samples = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k);
            let mut p = PathSample {
                jump_times: Vec::new(),
                states: vec![i0],
                horizon: eps,
            };
            extend(q, &mut p, 0.0, eps, &mut rng);
            let switch = p.states.len();
            // Holding times are memoryless, so the switch needs no bookkeeping.
            extend(qstar, &mut p, eps, horizon, &mut rng);
            let mut total = 0.0;
            for (k, (s, a, b)) in p.segments().enumerate() {
                if k + 1 < switch {
                    total += r_dev[s] * segment_integral(d, a, b)?;
                } else if k + 1 == switch {
                    total += r_dev[s] * segment_integral(d, a, eps.min(b))?;
                    if b > eps {
                        total += r_star[s] * segment_integral(d, eps, b)?;
                    }
                } else {
                    total += r_star[s] * segment_integral(d, a, b)?;
                }
            }
            Ok(total)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize(&samples, horizon, bias))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    #[test]
    fn zero_generator_never_jumps() {
        let p = simulate_path(&GeneratorMatrix::zeros(3), 1, 10.0, 7).unwrap();
        assert!(p.jump_times.is_empty());
        assert_eq!(p.states, vec![1]);
        assert_eq!(p.segments().collect::<Vec<_>>(), vec![(1, 0.0, 10.0)]);
    }

    #[test]
    fn paths_alternate_and_are_reproducible() {
        let q = GeneratorMatrix::two_state(1.0, 2.0);
        let a = simulate_path(&q, 0, 20.0, 42).unwrap();
        let b = simulate_path(&q, 0, 20.0, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.jump_times.windows(2).all(|w| w[0] < w[1]));
        assert!(a.states.windows(2).all(|w| w[0] != w[1]));
        assert_eq!(a.state_at(0.0), 0);
    }

    #[test]
    fn segment_integral_matches_quadrature() {
        let d = DiscountSpec::pseudo_exponential(0.5, 1.0, 2.0).unwrap();
        for (s, e) in [(0.0, 0.3), (1.2, 4.7), (10.0, 10.001)] {
            let exact = segment_integral(&d, s, e).unwrap();
            let quad = integrate(|t| d.value(t), s, e, 1e-14).unwrap();
            assert!((exact - quad).abs() < 1e-12, "{exact} vs {quad}");
        }
    }
}

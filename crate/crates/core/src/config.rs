//! Model files in JSON or TOML.
//!
//! States are numbered from 1 in files and from 0 in the library. A minimal
//! TOML model:
//!
//! ```toml
//! states = 2
//! default_box = { lo = 0.0, hi = 4.0 }
//!
//! [discount]
//! kind = "mixture"
//! weights = [0.5, 0.5]
//! rates = [1.0, 2.0]
//!
//! [[rows]]
//! entries = [{ to = 2, pieces = [[0.0, 0.0, -1.0]] }]
//!
//! [[rows]]
//! entries = [{ to = 1, pieces = [[1.0, 2.0, -1.0]] }]
//! ```
//!
//! Each entry gives the payoff term `p_ij(q_ij)` as polynomial pieces
//! (ascending coefficients) split at `knots`, and the box `[lo, hi]` for
//! `q_ij`. Entries left out carry no payoff term and use `default_box`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AdmissibleRowSet, DiscountSpec, GeneratorMatrix, ModelSpec, PiecewisePoly, Poly, RowPayoff,
    RunningPayoff, Tolerances,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Toml,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(Format::Json),
            Some("toml") => Ok(Format::Toml),
            _ => Err(Error::Config(format!(
                "{}: expected a .json or .toml file",
                path.display()
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiscountConfig {
    Mixture {
        weights: Vec<f64>,
        rates: Vec<f64>,
    },
    PseudoExponential {
        lambda: f64,
        rho: f64,
        rho_prime: f64,
    },
    Exponential {
        rho: f64,
    },
    Hyperbolic {
        beta: f64,
        power: f64,
        horizon: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    #[serde(default)]
    pub lo: f64,
    /// Absent means unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryConfig {
    /// Target state, 1-based.
    pub to: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    /// Polynomial pieces, ascending coefficients; empty means no payoff term.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pieces: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub knots: Vec<f64>,
    /// Payoff domain; defaults to `[0, ∞)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Interval>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowConfig {
    /// 1-based; defaults to the position in `rows`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<usize>,
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub entries: Vec<EntryConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub states: usize,
    pub discount: DiscountConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_box: Option<Interval>,
    pub rows: Vec<RowConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    /// Candidate generator, full rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<Vec<Vec<f64>>>,
    /// Deviation generator for sweeps and concatenated payoffs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation: Option<Vec<Vec<f64>>>,
}

fn cfg_err(field: impl AsRef<str>, msg: impl AsRef<str>) -> Error {
    Error::Config(format!("{}: {}", field.as_ref(), msg.as_ref()))
}

impl ModelConfig {
    pub fn parse(text: &str, format: Format) -> Result<Self> {
        match format {
            Format::Json => {
                let de = &mut serde_json::Deserializer::from_str(text);
                serde_path_to_error::deserialize(de).map_err(|e| {
                    let path = e.path().to_string();
                    let inner = e.into_inner();
                    Error::Config(format!(
                        "{path}: {inner} (line {}, column {})",
                        inner.line(),
                        inner.column()
                    ))
                })
            }
            // TOML errors already name the key and point at the line.
            Format::Toml => toml::from_str(text).map_err(|e| Error::Config(e.to_string())),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let format = Format::from_path(path)?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, format)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn discount(&self) -> Result<DiscountSpec> {
        let d = match &self.discount {
            DiscountConfig::Mixture { weights, rates } => DiscountSpec::ExponentialMixture {
                weights: weights.clone(),
                rates: rates.clone(),
            },
            DiscountConfig::PseudoExponential {
                lambda,
                rho,
                rho_prime,
            } => DiscountSpec::ExponentialMixture {
                weights: vec![*lambda, 1.0 - lambda],
                rates: vec![*rho, *rho_prime],
            },
            DiscountConfig::Exponential { rho } => DiscountSpec::ExponentialMixture {
                weights: vec![1.0],
                rates: vec![*rho],
            },
            DiscountConfig::Hyperbolic {
                beta,
                power,
                horizon,
            } => DiscountSpec::hyperbolic(*beta, *power, *horizon)?,
        };
        Ok(d)
    }

    /// Builds and validates the model. Error messages use file numbering.
    pub fn to_model(&self) -> Result<ModelSpec> {
        let n = self.states;
        if n == 0 {
            return Err(cfg_err("states", "must be at least 1"));
        }
        if self.rows.len() != n {
            return Err(cfg_err(
                "rows",
                format!("{} rows for {n} states", self.rows.len()),
            ));
        }
        let default_box = self.default_box.unwrap_or(Interval { lo: 0.0, hi: None });
        let mut payoff_rows = Vec::with_capacity(n);
        let mut boxes = Vec::with_capacity(n);
        for (k, row) in self.rows.iter().enumerate() {
            let at = format!("rows[{k}]");
            let i = match row.state {
                Some(s) if s == k + 1 => k,
                Some(s) => {
                    return Err(cfg_err(
                        format!("{at}.state"),
                        format!(
                            "is {s}, but rows must be listed in order (expected {})",
                            k + 1
                        ),
                    ))
                }
                None => k,
            };
            if !row.constant.is_finite() {
                return Err(cfg_err(format!("{at}.constant"), "must be finite"));
            }
            let mut terms: Vec<Option<PiecewisePoly>> = vec![None; n];
            let mut lo = vec![default_box.lo; n];
            let mut hi = vec![default_box.hi.unwrap_or(f64::INFINITY); n];
            let mut seen = vec![false; n];
            for (e, entry) in row.entries.iter().enumerate() {
                let at = format!("{at}.entries[{e}]");
                if entry.to == 0 || entry.to > n {
                    return Err(cfg_err(format!("{at}.to"), format!("must be in 1..={n}")));
                }
                let j = entry.to - 1;
                if j == i {
                    return Err(cfg_err(format!("{at}.to"), "diagonal entries are implied"));
                }
                if seen[j] {
                    return Err(cfg_err(
                        format!("{at}.to"),
                        format!("state {} listed twice", j + 1),
                    ));
                }
                seen[j] = true;
                if let Some(l) = entry.lo {
                    lo[j] = l;
                }
                if let Some(h) = entry.hi {
                    hi[j] = h;
                }
                if !(lo[j].is_finite() && lo[j] >= 0.0) {
                    return Err(cfg_err(
                        format!("{at}.lo"),
                        format!("rate bound {} must be finite and nonnegative", lo[j]),
                    ));
                }
                if hi[j].is_nan() || hi[j] < lo[j] {
                    return Err(cfg_err(
                        format!("{at}.hi"),
                        format!("{} is below lo", hi[j]),
                    ));
                }
                if !entry.pieces.is_empty() {
                    let d = entry.domain.unwrap_or(Interval { lo: 0.0, hi: None });
                    let (dlo, dhi) = (d.lo, d.hi);
                    let pieces = entry.pieces.iter().map(|c| Poly::new(c.clone())).collect();
                    let p = PiecewisePoly::new(
                        dlo,
                        dhi.unwrap_or(f64::INFINITY),
                        entry.knots.clone(),
                        pieces,
                    )
                    .map_err(|err| match err {
                        Error::InvalidModel { field, message } => {
                            cfg_err(format!("{at}.{field}"), message)
                        }
                        other => other,
                    })?;
                    terms[j] = Some(p);
                } else if !entry.knots.is_empty() || entry.domain.is_some() {
                    return Err(cfg_err(
                        format!("{at}.pieces"),
                        "knots or domain given without pieces",
                    ));
                }
            }
            payoff_rows.push(RowPayoff {
                constant: row.constant,
                terms,
            });
            boxes.push(AdmissibleRowSet::new(i, lo, hi).map_err(|err| rename(err, &at))?);
        }
        let payoff = RunningPayoff::new(payoff_rows)?;
        let discount = self.discount().map_err(|e| rename(e, "discount"))?;
        let model = ModelSpec::with_tolerances(
            discount,
            payoff,
            boxes,
            self.tolerances.unwrap_or_default(),
        )
        .map_err(|e| rename(e, ""))?;
        Ok(model)
    }

    pub fn candidate(&self) -> Result<Option<GeneratorMatrix>> {
        self.candidate
            .as_ref()
            .map(|r| GeneratorMatrix::from_rows(r).map_err(|e| cfg_err("candidate", e.to_string())))
            .transpose()
    }

    pub fn deviation(&self) -> Result<Option<GeneratorMatrix>> {
        self.deviation
            .as_ref()
            .map(|r| GeneratorMatrix::from_rows(r).map_err(|e| cfg_err("deviation", e.to_string())))
            .transpose()
    }

    /// The file form of a model with a mixture discount.
    pub fn from_model(model: &ModelSpec) -> Result<Self> {
        let (w, r) = model.discount().components().ok_or_else(|| {
            Error::Unsupported("only mixture discounts can be written out".into())
        })?;
        let n = model.n();
        let rows = (0..n)
            .map(|i| {
                let set = model.row_set(i);
                let prow = model.payoff().row(i);
                RowConfig {
                    state: Some(i + 1),
                    constant: prow.constant,
                    entries: set
                        .targets()
                        .map(|j| {
                            let (pieces, knots, domain) = match prow.term(j) {
                                Some(p) => {
                                    let (lo, hi) = p.domain();
                                    (
                                        p.pieces().iter().map(|c| c.coeffs().to_vec()).collect(),
                                        p.knots().to_vec(),
                                        Some(Interval {
                                            lo,
                                            hi: hi.is_finite().then_some(hi),
                                        }),
                                    )
                                }
                                None => (Vec::new(), Vec::new(), None),
                            };
                            EntryConfig {
                                to: j + 1,
                                lo: Some(set.lo(j)),
                                hi: set.hi(j).is_finite().then_some(set.hi(j)),
                                pieces,
                                knots,
                                domain,
                            }
                        })
                        .collect(),
                }
            })
            .collect();
        Ok(ModelConfig {
            states: n,
            discount: DiscountConfig::Mixture {
                weights: w.to_vec(),
                rates: r.to_vec(),
            },
            default_box: None,
            rows,
            tolerances: Some(model.tolerances()),
            candidate: None,
            deviation: None,
        })
    }
}

/// Re-labels library field names (`boxes[i]`, `discount.rates[k]`) as config paths.
fn rename(err: Error, prefix: &str) -> Error {
    match err {
        Error::InvalidModel { field, message } => {
            let field = if prefix.is_empty() || field.starts_with(prefix) {
                field
            } else {
                format!("{prefix} ({field})")
            };
            cfg_err(field, message)
        }
        other => other,
    }
}

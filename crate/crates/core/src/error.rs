use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {field}: {message}")]
    InvalidModel { field: String, message: String },

    #[error("invalid generator: {}", format_violations(.0))]
    InvalidGenerator(Vec<Violation>),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("payoff argument {x} outside declared domain [{lo}, {hi}]")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },

    #[error("row {state} is infeasible: {reason}")]
    InfeasibleRow { state: usize, reason: String },

    #[error("resolvent solve failed for rate {rate}: {reason}")]
    Resolvent { rate: f64, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("transition matrix inaccurate: {0}")]
    Inaccurate(String),

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },

    #[error("discount tail bound {bound:e} exceeds tolerance {tol:e}")]
    TailBound { bound: f64, tol: f64 },

    #[error("no maximum for state {state}, entry {target}: objective unbounded above")]
    NoMaximum { state: usize, target: usize },

    #[error("row {state} has an unbounded box; a finite upper bound is required here")]
    UnboundedBox { state: usize },

    #[error("mesh {mesh} too coarse: row {state} can leave the probability simplex")]
    MeshTooCoarse { mesh: f64, state: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown example `{0}`")]
    UnknownExample(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn model(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidModel {
            field: field.into(),
            message: message.into(),
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

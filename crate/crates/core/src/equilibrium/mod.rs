//! Expansion functionals, equilibrium classification and fixed-point search.
//!
//! For a candidate `Q*` and a deviation `Q` used on `[0, ε]`,
//! `F(i, Q*) − F(i, Q ⊗_ε Q*) = L₁ ε + L₂ ε² + O(ε³)` with
//! `L₁ = Γ(Q*_i) − Γ(Q_i)` and `L₂ = ½ (Λ(i, Q*) − Λ(i, Q))`.
//! A weak equilibrium makes every `L₁ ≥ 0`; a strong one makes the whole
//! difference nonnegative for small `ε`, which at first-order ties is decided
//! by `Λ` and, when that also ties, by ε-sweeps.

mod classify;
mod functionals;
mod probe;
mod rowopt;
mod solve;

use serde::{Deserialize, Serialize};

pub use classify::{
    strong_check, weak_check, EquilibriumReport, KktEntry, Relation, RowClassification,
    RowWeakDiagnostics, TieEvaluation, UndecidedPair, Verdict, WeakReport, Witness,
};
pub use functionals::{
    gamma_row, lambda_bar_row, lambda_full, maximize_gamma_row, Baseline, CoordinateArgmax,
    RowGammaProfile,
};
pub use probe::{default_eps_grid, expansion_probe, ExpansionProbe, TailSign};
pub use rowopt::{maximize_1d, TieComponent, GRID_POINTS};
pub use solve::{
    best_response, fixed_point_solve, halton_starts, BestResponse, Selection, SolveConfig,
    SolveOutcome, SolvedCandidate, StartFailure,
};

pub(crate) use classify::kkt_entries;
pub(crate) use functionals::maximize_separable;
pub(crate) use solve::{damped_iteration, require_compact};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOptions {
    /// Relative tie tolerance: `τ_tie = tie_rel · (1 + |max Γ|)`.
    pub tie_rel: f64,
    /// Absolute tolerance on second-order comparisons.
    pub val_tol: f64,
    pub eps_grid: Vec<f64>,
    /// Interior samples per flat tie interval.
    pub tie_samples: usize,
    /// Largest tie product enumerated in full.
    pub max_product: usize,
    /// Cap on structured ε-sweeps in a strong check.
    pub max_cross_probes: usize,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            tie_rel: 1e-7,
            val_tol: 1e-9,
            eps_grid: default_eps_grid(),
            tie_samples: 9,
            max_product: 64,
            max_cross_probes: 200,
        }
    }
}

//! Weak and strong equilibria of time-inconsistent control problems whose
//! state is a finite continuous-time Markov chain.
//!
//! The controller picks a generator `Q` row by row. Payoffs are
//! `F(i, Q) = E_i ∫ δ(t) g(X_t, Q_{X_t}) dt` with a non-exponential discount
//! `δ`, so an optimal plan made today is not followed tomorrow and the
//! relevant notion is an equilibrium against future selves.
//!
//! * [`model`]: generators, admissible boxes, discounts, piecewise-polynomial payoffs.
//! * [`payoff`]: `F`, `F_ε`, `G` and concatenated payoffs.
//! * [`equilibrium`]: first/second-order functionals, classification, fixed-point search.
//! * [`twostate`]: closed forms for two states and the built-in examples.
//! * [`discrete`]: the discrete-time analogue and mesh-refinement experiments.
//! * [`montecarlo`]: path simulation used as an independent oracle.

pub mod config;
pub mod discrete;
pub mod equilibrium;
pub mod error;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod payoff;
pub mod quadrature;
pub mod twostate;

pub use error::{Error, Result};
pub use model::{
    validate_generator, AdmissibleRowSet, DiscountSpec, GeneratorMatrix, ModelSpec, PiecewisePoly,
    Poly, RowPayoff, RunningPayoff,
};

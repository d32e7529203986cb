//! AGILS: an alternating gradient-type method with inexact lower-level
//! solutions for bilevel optimization, built on a Moreau-envelope
//! reformulation of the lower-level optimality constraint.
//!
//! The crate is organized as:
//! - [`problem`]: dense-vector numerics, the bilevel oracle interface and
//!   the smoothness/step-size bookkeeping,
//! - [`prox`]: closed-form proximal operators, projections, and the
//!   prox-gradient residual used as the inexactness contract,
//! - [`inner`]: iterative solvers (PGM / FISTA / ADMM) for the proximal
//!   lower-level problem and the plain lower-level problem,
//! - [`solver`]: the AGILS outer loop with penalty adaptation and the
//!   feasibility-correction procedure,
//! - [`instances`]: the two benchmark problems (toy, sparse group Lasso),
//! - [`baselines`]: grid and random hyperparameter search,
//! - [`harness`]: experiment configuration, orchestration and CSV traces.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod inner;
pub mod instances;
pub mod problem;
pub mod prox;
pub mod solver;

pub use error::AgilsError;
pub use problem::{BilevelOracle, ProblemConstants, Vector};
pub use solver::{AgilsConfig, RunTrace};

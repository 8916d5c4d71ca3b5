//! Finite-volume solver and verification diagnostics for the transparent-media
//! equation `-div(|u|^m Du/|Du|) = f` with homogeneous Dirichlet data.
//!
//! Solutions are obtained as limits of the regularized problems
//! `-div(T_{1/delta}(|u|)^m grad u / |grad u|_eps + eps grad u) = f`
//! along a decreasing sequence of `eps`.

pub mod banded;
pub mod bounds;
pub mod calculus;
pub mod error;
pub mod field;
pub mod fixtures;
pub mod flux;
pub mod grid;
pub mod io;
pub mod operator;
pub mod rearrangement;
pub mod solver;

pub use banded::SparseOperator;
pub use error::{Error, Result};
pub use field::{FaceField, ScalarField};
pub use grid::{Face, FaceKind, Grid, GridSpec};
pub use operator::OperatorParams;
pub use solver::{Solution, SolverConfig, SweepResult};

//! Numerical laboratory for the semiclassical structure of one-dimensional
//! quantum mechanics: split-step Schrodinger propagation, Madelung fields,
//! Hamilton-Jacobi flows, Liouville transport and a deterministic-potential
//! test.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod lab;
pub mod classical;
pub mod detpot;
pub mod madelung;
mod par;
pub mod phj;
pub mod potential;
pub mod schrodinger;

pub use error::{Error, Result};
pub use grid::{Grid, RealField, ComplexField};
pub use potential::{PotentialKind, PotentialSpec};

//! Simulator and verification lab for axisymmetric MHD with a swirling
//! magnetic field.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elliptic;
pub mod error;
pub mod evolve;
pub mod exponents;
pub mod functionals;
pub mod grid;
pub mod harness;
pub mod littlewood_paley;
pub mod operators;

pub use error::{Error, Result};
pub use grid::{Grid, Parity, ScalarField};

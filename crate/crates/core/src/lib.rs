//! Numerical engine for highest-weight representation data of dynamical
//! quantum groups built from quantum affine algebras.
//!
//! The pipeline, bottom to top:
//!
//! * [`series`] — truncated matrix Laurent series with fractional exponent
//!   offsets, in one and two variables.
//! * [`theta`] — the odd Jacobi theta function and annulus expansions of
//!   theta quotients.
//! * [`qaff`] — the quantum affine algebra U_q(ŝl_n) acting on truncated
//!   Verma modules and evaluation modules, with relation checking.
//! * [`intertwine`] — intertwining operators, quantum correlation
//!   functions, and fusion matrices (qKZ twists), both for pairs of
//!   evaluation modules and for evaluation ⊗ category-O pairs.
//! * [`exchange`] — extraction of the R-matrix from the qKZ difference
//!   equation, exchange matrices, and verification of the dynamical
//!   Yang–Baxter identities with and without central charge.
//! * [`elliptic`] — Felder's elliptic dynamical R-matrix in closed theta
//!   form, gauge transformations, and the series-vs-elliptic fit.
//! * [`reps`] — the representation category of the dynamical R-matrix:
//!   bounded representations with central charge, functors from module
//!   categories, and the tensor bifunctor.

pub mod cnum;
pub mod elliptic;
pub mod error;
pub mod exchange;
pub mod intertwine;
pub mod params;
pub mod qaff;
pub mod report;
pub mod reps;
pub mod series;
pub mod theta;
pub mod weights;

pub use cnum::C64;
pub use error::Error;
pub use params::Params;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

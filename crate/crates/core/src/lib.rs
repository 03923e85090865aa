//! Numerical laboratory for surfaces with flat centroaffine metric.
//!
//! Exact solutions of the associativity equations, surface reconstruction
//! from the spectral linear system, centroaffine invariants and the
//! characteristic 3-web, and the chain of transformations to the 3-wave
//! system.

// NaN must fail range checks, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod catalog;
pub mod error;
pub mod fields;
pub mod frames;
pub mod hydro;
pub mod invariants;
pub mod meshio;
pub mod ode;
pub mod sampling;
pub mod taylor;
pub mod transforms;
pub mod wdvv;

pub use catalog::{EquationForm, JetSource, Solution};
pub use error::{Error, Result};
pub use fields::{Grid2D, Jet3, Mat3, OneFormField, Point2, ScalarField2D};
pub use sampling::Domain;

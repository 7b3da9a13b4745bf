//! Numerical verification of compatible and flat pencils of metrics.
//!
//! Metrics are given as closed-form coordinate expressions. Every tensor object
//! (Christoffel symbols, curvature, affinor, Nijenhuis and M tensors) is
//! computed at sample points from exact third-order jets, and pencil
//! properties are decided from scale-relative residuals. On top of that sit
//! checkers for the Lamé system and its reduction, the two-component theory,
//! and a Nyström solver for the dressing integral equation.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod compat;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod grid;
pub mod lame;
pub mod linalg;
pub mod report;
pub mod sampling;
pub mod twocomp;
pub mod zakharov;

pub use error::{Error, Point, Result};
pub use expr::{Jet3, ScalarField};
pub use geometry::{GeometryJet, MetricField, Variance};
pub use num_complex::Complex64;
pub use sampling::Sampling;

//! Finite-element laboratory for gradient blow-up between two nearly touching
//! stiff inclusions.
//!
//! The pipeline: [`geometry`] builds the two-inclusion configuration at a gap
//! width `eps`, [`meshgen`] grades a triangulation into the gap, [`fem`]
//! assembles the Laplace, axisymmetric Laplace or Lamé forms, [`constrained`]
//! solves the rigid-inclusion / floating-conductor problems by DOF tying,
//! [`decomposition`] reproduces the coefficient analysis, [`blowup`] evaluates
//! the touching-limit blow-up factors, and [`sweep`] runs eps-sweeps and rate
//! fits. [`config`] reads the INI run configuration.

// Negated comparisons reject NaN on purpose; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bc;
pub mod config;
pub mod blowup;
pub mod constrained;
pub mod decomposition;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod meshgen;
pub mod sweep;

pub use error::{Error, Result};

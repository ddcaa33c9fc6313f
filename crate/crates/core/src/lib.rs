//! Relative belief inference and prior-based Bayesian decision theory.
//!
//! Finite models live in [`model`]; [`evidence`] computes relative belief
//! ratios and the inferences built on them; [`decision`] gives Bayes rules
//! for the RB, MAP and bounded RB losses. [`grid`] discretizes continuous
//! distributions and [`limits`] runs the limit experiments on top of it.
//! [`classify`] and [`regress`] hold the two worked applications.

pub mod classify;
pub mod cli;
pub mod decision;
pub mod error;
pub mod evidence;
pub mod grid;
pub mod limits;
pub mod model;
mod numeric;
pub mod regress;
pub mod report;

pub use error::{Error, Result};
pub use numeric::{argmax_with_tie, compensated_sum};

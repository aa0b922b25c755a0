//! Analysis of one-dimensional piecewise-smooth discontinuous maps.
//!
//! The crate computes symbolic itineraries, rotation and η-numbers, finds
//! periodic orbits, checks the Farey-tree and maximin structure of their
//! symbolic sequences, and scans parameter families for period adding and
//! period incrementing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod circlemap;
pub mod cli;
pub mod error;
pub mod farey;
pub mod models;
pub mod ode;
pub mod pwmap;
pub mod report;
pub mod symbolic;

pub use error::{Error, Result};
pub use farey::Rational;
pub use symbolic::{Symbol, SymbolicWord};

//! Outage probabilities of a source-relay-destination link inside a Poisson
//! field of interferers with Rayleigh fading.
//!
//! The crate evaluates decode-and-forward (exact), compress-and-forward
//! (upper and lower bounds), direct transmission and the cut-set outage lower
//! bound, cross-checks every closed form against a Monte Carlo simulator, and
//! drives parameter searches (compression noise, correlation, maximum rate,
//! relay-position region maps).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod error;
pub mod exec;
pub mod interference;
pub mod model;
pub mod montecarlo;
pub mod quad;
pub mod search;

pub use error::{Error, Result};

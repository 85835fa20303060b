//! Probabilistic relaxation of volume-normalized graph cuts.
//!
//! The crate evaluates expectations of the form `E[1 / (q + x)]`, where `x` is a
//! weighted sum of independent Bernoulli variables, and bounds them from above with
//! closed-form truncated Gauss hypergeometric envelopes. On top of those envelopes it
//! builds a differentiable surrogate for the expected RatioCut / Normalized Cut of a
//! soft assignment matrix, together with its analytic gradient and a small first-order
//! clustering driver.
//!
//! Every bound ships with an independent oracle (exact enumeration, adaptive
//! quadrature, Monte Carlo) so that the inequalities can be checked numerically.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, reports and the command
//! line live in the companion `probcut-cli` crate.

#![no_std]
#![deny(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod concentration;
pub mod envelope;
mod error;
pub mod gap;
pub mod gpb;
pub mod graph;
pub mod hypergeom;
pub mod objective;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod sum;

pub use error::{Error, Result};

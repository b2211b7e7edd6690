//! The Mallows measure on permutations, end to end.
//!
//! - [`qnum`]: log-space q-Pochhammer arithmetic and the real dilogarithm.
//! - [`mallows`]: permutations, inversion counts, the measure, and the q-shuffle sampler.
//! - [`exactdist`]: exact finite-N laws of single- and multi-point height functions.
//! - [`asymlaw`]: closed-form limit laws (limit shape, rate function, Gaussian scales, covariance).
//! - [`verify`]: harness that confronts exact, asymptotic and Monte Carlo answers.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod asymlaw;
pub mod error;
pub mod exactdist;
pub mod mallows;
pub mod qnum;
pub mod verify;

pub use error::{Error, Result};

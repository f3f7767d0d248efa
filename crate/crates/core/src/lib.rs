//! Sparse domination of continuous-time martingales with jumps, weighted norm
//! bounds, and a Monte Carlo representation of Riesz transforms.
//!
//! Two engines share the constructions: [`treespace`] evaluates everything exactly
//! on finite filtered trees, while [`paths`] generates discretized càdlàg paths for
//! Monte Carlo batches.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod paths;
pub mod riesz;
pub mod rng;
pub mod sparse;
pub mod treespace;
pub mod weights;
pub mod zprocess;

pub use error::{Error, Result};

//! Adaptive confidence intervals for linear functionals in a discretized
//! Gaussian sequence model.
//!
//! The crate is organised around a handful of layers:
//!
//! * [`seqmodel`] holds the observation model, functionals and seeding.
//! * [`spaces`] is the catalog of convex parameter spaces with exact or
//!   iterative Euclidean projections.
//! * [`solver`] is a primal-dual interior point method used for moduli and
//!   bias certification.
//! * [`modulus`], [`estimators`], [`intervals`] and [`bounds`] build the
//!   statistical procedures.
//! * [`harness`] runs Monte Carlo experiments and writes reports.

// NaN-rejecting `!(x > 0.0)` checks and indexed loops over parallel arrays
// are intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod intervals;
pub mod modulus;
pub mod par;
pub mod seqmodel;
pub mod solver;
pub mod spaces;

pub use error::{Error, Result};

//! Deterministic SVD, energy-threshold rank selection and Tucker-2.
//!
//! The Jacobi SVD always computes the full spectrum; truncation happens
//! afterwards. At the layer sizes this crate targets (`C_in·κ²` up to a few
//! thousand) that is cheap enough, though it does not have the
//! rank-proportional cost of an iterative truncated solver.

mod rank;
mod svd;
mod tucker;

pub use rank::{retained_energy, select_rank, RankPolicy};
pub use svd::{svd, SvdFactors};
pub use tucker::{tucker2, tucker2_params, TuckerFactors};

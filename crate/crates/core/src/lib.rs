//! Accelerated life test sampling plans for Weibull lifetimes under Type-I
//! censoring, with piecewise-linear stress–life links.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod cli;
pub mod dist;
pub mod error;
pub mod fisher;
pub mod inference;
pub mod link;
pub mod numeric;
pub mod objectives;
pub mod optimizer;
pub mod par;
pub mod study;

pub use error::{Error, Result};

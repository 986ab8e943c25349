//! Level set estimation with kernelized experimental design.
//!
//! Explicit thresholds (`f(x) >= alpha`) are handled by [`melk`], implicit multiplicative
//! thresholds (`f(x) >= (1 - eps) max f`) by [`milk`] and, for fixed budgets on independent
//! arms, by [`latte`]. [`gp`] holds the acquisition-function baselines and [`harness`] the
//! experiment plumbing.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod env;
pub mod error;
pub mod gp;
pub mod harness;
pub mod kernels;
pub mod latte;
pub mod linalg;
pub mod melk;
pub mod milk;
pub mod rng;
pub mod robust;
pub mod run;

pub use error::{Error, Result};

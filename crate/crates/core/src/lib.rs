//! Monte Carlo, multilevel Monte Carlo and projected multilevel Monte Carlo
//! estimators for the mean pressure of Darcy flow,
//!
//! ```text
//!     -div(k(x, w) grad u) = 0   in D = (0, 1)^d,  d = 1, 2,
//!     u = 1 on x1 = 0,  u = 0 on x1 = 1,  du/dn = 0 elsewhere,
//! ```
//!
//! where `log k` is a Gaussian field with exponential covariance represented
//! by a truncated Karhunen-Loeve expansion.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! parallel execution live in the `pmlmc-harness` crate.
//!
//! Levels are indexed from 0 (coarsest) throughout.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod allocation;
pub mod cost;
pub mod darcy;
pub mod error;
pub mod estimators;
pub mod fem;
pub mod mesh;
pub mod random_field;
pub mod rng;
pub mod sparse;
pub mod stats;
pub mod transfer;

pub use crate::cost::OpCount;
pub use crate::error::{Error, Result};
pub use crate::rng::{RngKey, Role};

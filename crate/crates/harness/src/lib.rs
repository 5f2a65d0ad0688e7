//! Std companion of `pmlmc-core`: configuration, file formats, a rayon
//! executor and the experiment runner behind the `pmlmc` binary.

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod io;

pub use crate::config::{ExperimentConfig, PartialConfig};
pub use crate::error::{HarnessError, Result};

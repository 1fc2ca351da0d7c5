//! Configuration, orchestration and output for the `casimir-grating` binary.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod commands;
pub mod config;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod output;

pub use config::{Overrides, Resolved, RunConfig};
pub use error::{CliError, Outcome};

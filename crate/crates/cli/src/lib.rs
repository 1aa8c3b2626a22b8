//! Experiment runner for probe-state preparation and sensing.
//!
//! Each command reads a JSON configuration, writes CSV files into an output
//! directory and records the run in `manifest.json` (configuration hash,
//! seed and tool version). Exit codes: 0 success, 2 configuration error,
//! 3 numerical failure, 4 results outside their acceptance tolerance.

// `!(x > 0.0)` also rejects NaN; `is_multiple_of` is newer than the
// supported toolchain.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::manual_is_multiple_of)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::Context;
pub use error::{CliError, CliResult};

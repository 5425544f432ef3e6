//! Command implementations behind the `mmrac` binary.
//!
//! Each `cmd_*` function writes its artifacts to disk and its human-readable
//! report to the supplied writer, so the commands can be driven in-process.

// Negated comparisons are used so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod output;

pub use commands::{cmd_compare, cmd_pe_check, cmd_refine, cmd_simulate, CompareOverrides, Overrides};
pub use error::{CliError, CliResult};

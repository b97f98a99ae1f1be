//! File formats and the command-line front end for the scaling-law toolkit.
//!
//! The numerics live in `scalelaw-core`; this crate reads run logs and shape
//! documents, merges constant presets with user overrides, and renders
//! reports as JSON, CSV or text tables.

pub mod cli;
pub mod commands;
pub mod constants;
mod error;
pub mod report;
pub mod runlog;
pub mod shape;

pub use error::{CliError, Result};

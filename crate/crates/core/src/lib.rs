//! Scaling-law toolkit core.
//!
//! Everything here is pure computation over `f64` and runs without `std`
//! (an allocator is required for the fitters). File formats, the run-log
//! reader and the command-line front end live in the `scalelaw` crate.
//!
//! Module map:
//!
//! - [`arch`]: non-embedding parameter and FLOP accounting for a Transformer shape.
//! - [`laws`]: closed-form loss laws, critical batch size, overfitting and early stopping.
//! - [`batch`]: conversion between raw training quantities and the critical-batch frame.
//! - [`fit`]: run records, exclusion rules, fitters for every law family, synthetic runs.
//! - [`frontier`]: compute-optimal allocation and the data/compute intersection point.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod arch;
pub mod batch;
mod error;
pub mod fit;
pub mod frontier;
pub mod laws;
mod numeric;

pub use error::{Error, Result};

/// FLOPs in one petaflop/s-day: 10^15 × 24 × 3600.
pub const PF_DAY_FLOPS: f64 = 8.64e19;

//! Coexistence of decoy-state QKD with classical data channels in 7-core
//! multicore fiber: leakage link budget, key-rate evaluation, distance and
//! wavelength sweeps, and a core/wavelength allocation planner.

// `!(a < b)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod classical;
pub mod error;
pub mod fiber;
pub mod leakage;
pub mod planner;
pub mod qkd;
pub mod scenario;
pub mod units;

pub use error::{ModelError, Result};

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

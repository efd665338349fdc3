//! Decision-threshold and clinical-workflow evaluation toolkit: case-level
//! metrics, constrained threshold selection with a locked registry,
//! triage/second-review/prioritization simulations, bootstrap inference,
//! reader-study statistics, and survival analysis.

pub mod cohort;
pub mod error;
pub mod inference;
pub mod metrics;
pub mod policy;
pub mod resample;
pub mod simulate;
pub mod survival;

pub use error::{Error, Result};

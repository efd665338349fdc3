//! Subcommand implementations. Each command returns a written [`Report`];
//! partial failures land in the report's error list and flip the exit code.

pub mod agreement;
pub mod compare;
pub mod metrics;
pub mod reader;
pub mod simulate;
pub mod survival;
pub mod thresholds;

use std::path::Path;

use anyhow::{Context, Result};
use triagebench_core::cohort::{self, Cohort, CohortRole, CohortSchema};
use triagebench_core::resample::{BootstrapConfig, DEFAULT_SEED};

use crate::parse;

pub const SEED_ENV: &str = "TRIAGEBENCH_SEED";

/// Seed precedence: explicit flag, then TRIAGEBENCH_SEED, then the fixed
/// documented default.
pub fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| std::env::var(SEED_ENV).ok().and_then(|v| v.parse().ok()))
        .unwrap_or(DEFAULT_SEED)
}

pub fn bootstrap_config(seed: u64, resamples: usize, level: f64) -> BootstrapConfig {
    BootstrapConfig { n_resamples: resamples, seed, level }
}

pub fn load_cohort(input: &Path, schema: &str, name: Option<&str>, role: &str) -> Result<Cohort> {
    let class_map = parse::parse_class_map(schema)?;
    let name = name
        .map(str::to_string)
        .or_else(|| input.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "cohort".to_string());
    let role = CohortRole::parse(role)
        .ok_or_else(|| anyhow::anyhow!("unknown cohort role '{role}'"))?;
    let schema = CohortSchema { class_map, name, role };
    cohort::load_cohort(input, &schema).context("loading cohort")
}

//! Job runner behind the `qfel` binary: JSON job configs, output files with a
//! hashed manifest, and optional SVG plots.

pub mod config;
pub mod jobs;
pub mod output;
pub mod svg;

pub use config::{load, parse, ConfigError, Job, JobConfig};
pub use jobs::{run, RunError, RunOptions, RunReport};

/// Default basis-dimension cap, overridable through `QFEL_MAX_DIM`.
pub const DEFAULT_MAX_DIM: usize = 5_000_000;

/// Parses a `QFEL_MAX_DIM` value. Accepts plain integers and float notation such as `5e6`.
pub fn parse_max_dim(raw: &str) -> Result<usize, String> {
    let raw = raw.trim();
    if let Ok(n) = raw.parse::<usize>() {
        return if n > 0 { Ok(n) } else { Err("QFEL_MAX_DIM must be positive".into()) };
    }
    match raw.parse::<f64>() {
        Ok(x) if x >= 1.0 && x.fract() == 0.0 && x <= usize::MAX as f64 => Ok(x as usize),
        _ => Err(format!("QFEL_MAX_DIM must be a positive integer, got {raw:?}")),
    }
}

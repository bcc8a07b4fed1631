//! Experiment runner and comparison tools for the synaptic channel models.

pub mod compare;
pub mod error;
pub mod experiment;
pub mod overrides;

pub use compare::{compare, ComparisonReport, Model};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, Artifacts, ExperimentName, ExperimentSpec, OutputKind, Sweep};

/// Configuration used when no `--config` is given.
pub const DEFAULT_CONFIG: &str = include_str!("../fixtures/reference.json");

/// Parse a configuration document, apply `--set` edits and validate it.
pub fn load_config_with(text: &str, assignments: &[String]) -> Result<dmc_core::Config> {
    let mut doc: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| HarnessError::invalid(format!("failed to parse configuration: {e}")))?;
    overrides::apply_all(&mut doc, assignments)?;
    Ok(dmc_core::config::load_config_value(doc)?)
}

/// Thread count from `DMC_THREADS`, if set.
pub fn env_threads() -> Result<Option<usize>> {
    match std::env::var("DMC_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| HarnessError::usage(format!("DMC_THREADS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

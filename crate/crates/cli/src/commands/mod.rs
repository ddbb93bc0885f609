//! Subcommand implementations.

pub mod bench;
pub mod evaluate;
pub mod generate;
pub mod optimize;
pub mod validate;

use std::path::{Path, PathBuf};

use atfcm_core::trajectory::IntentVector;
use atfcm_core::{Evaluator, IntentFile, Result, Scenario};

/// Directory searched for scenario names when set.
pub const SCENARIO_DIR_ENV: &str = "ATFCM_SCENARIO_DIR";
pub const DEFAULT_SCENARIO_DIR: &str = "scenarios";
pub const DEFAULT_SCENARIO: &str = "x_instance.json";

/// Resolves `--scenario`: an existing path is used as is; otherwise the
/// value (default `x_instance.json`) is looked up in the scenario directory,
/// with `.json` appended when missing.
pub fn resolve_scenario(arg: Option<&Path>, dir: Option<&Path>) -> PathBuf {
    if let Some(p) = arg {
        if p.exists() {
            return p.to_path_buf();
        }
    }
    let dir = dir.map_or_else(|| PathBuf::from(DEFAULT_SCENARIO_DIR), Path::to_path_buf);
    let name = arg.unwrap_or(Path::new(DEFAULT_SCENARIO));
    let candidate = dir.join(name);
    if candidate.exists() || candidate.extension().is_some() {
        candidate
    } else {
        candidate.with_extension("json")
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::from_json(&crate::output::read_to_string(path)?)
}

/// Intent file when given, nominal targets otherwise.
pub fn load_intents(evaluator: &Evaluator, path: Option<&Path>) -> Result<IntentVector> {
    match path {
        Some(p) => IntentFile::from_json(&crate::output::read_to_string(p)?)?.to_vector(evaluator.scenario()),
        None => Ok(evaluator.nominal_intents()),
    }
}

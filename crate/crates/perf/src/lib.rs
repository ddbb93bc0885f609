//! Shared fixtures for the benchmarks and the acceptance suite.

use atfcm_core::instances::{generate_grid_instance, generate_x_instance};
use atfcm_core::{Evaluator, PmfConfig, PmfMethod};

/// PMF settings with the direct method uncapped.
pub fn pmf_config(method: PmfMethod) -> PmfConfig {
    PmfConfig { method, direct_cap: usize::MAX, ..PmfConfig::default() }
}

pub fn x_evaluator(method: PmfMethod) -> Evaluator {
    Evaluator::new(&generate_x_instance(), pmf_config(method)).expect("generated instance is valid")
}

pub fn grid_evaluator(method: PmfMethod) -> Evaluator {
    Evaluator::new(&generate_grid_instance(), pmf_config(method)).expect("generated instance is valid")
}

use std::path::{Path, PathBuf};

use atfcm_core::instances::{generate_grid_instance, generate_x_instance};
use atfcm_core::{Result, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instance {
    X,
    Grid,
}

impl Instance {
    pub fn file_name(self) -> &'static str {
        match self {
            Instance::X => "x_instance.json",
            Instance::Grid => "grid_instance.json",
        }
    }

    pub fn scenario(self) -> Scenario {
        match self {
            Instance::X => generate_x_instance(),
            Instance::Grid => generate_grid_instance(),
        }
    }
}

/// Writes the instance into `out` and returns the file path.
pub fn generate(instance: Instance, out: &Path) -> Result<PathBuf> {
    crate::output::create_dir(out)?;
    let path = out.join(instance.file_name());
    instance.scenario().save(&path)?;
    Ok(path)
}

//! Command-line front end and HTTP service for the congestion engine.

pub mod commands;
pub mod output;
pub mod service;

use atfcm_core::Scenario;
use sha2::{Digest, Sha256};

/// SHA-256 of the canonical scenario JSON, hex encoded.
pub fn version_hash(scenario: &Scenario) -> String {
    hex::encode(Sha256::digest(scenario.to_json().as_bytes()))
}

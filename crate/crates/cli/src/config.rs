//! The TOML run configuration.

use std::path::Path;

use bnn_core::simulation::DgpConfig;
use bnn_core::SamplerConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplicateSection {
    pub reps: usize,
    pub ks: Vec<usize>,
    /// Estimate with stochastic volatility; `false` gives the constant
    /// variance variant of the table.
    pub sv: bool,
    pub base_seed: u64,
    pub t: usize,
    pub train_size: usize,
    pub c_sq: f64,
}

impl Default for ReplicateSection {
    fn default() -> Self {
        Self {
            reps: 20,
            ks: vec![30, 60],
            sv: true,
            base_seed: 1,
            t: 200,
            train_size: 100,
            c_sq: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecursiveSection {
    pub start_index: usize,
    pub min_train: usize,
    pub warm_start: bool,
}

impl Default for RecursiveSection {
    fn default() -> Self {
        Self {
            start_index: 40,
            min_train: 40,
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sampler: SamplerConfig,
    pub dgp: DgpConfig,
    pub replicate: ReplicateSection,
    pub recursive: RecursiveSection,
}

impl RunConfig {
    /// Reads `path`, or returns the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the resolved configuration in canonical TOML form.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("configuration serializes");
        hex(&Sha256::digest(text.as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};
use crate::error::{CliError, CliResult};

/// Everything needed to rerun a command: the resolved configuration, its
/// hash, the seed, input file digests and program versions.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub core_version: String,
    pub seed: u64,
    pub threads: usize,
    pub config_hash: String,
    pub config: RunConfig,
    /// Input path to SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, seed: u64) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            core_version: bnn_core::VERSION.into(),
            seed,
            threads: rayon::current_num_threads(),
            config_hash: config.hash(),
            config: config.clone(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let digest = if path.is_dir() {
            let mut entries: Vec<_> = std::fs::read_dir(path)
                .map_err(|e| CliError::read(path, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            let mut h = Sha256::new();
            for p in entries {
                h.update(p.file_name().unwrap_or_default().as_encoded_bytes());
                h.update(std::fs::read(&p).map_err(|e| CliError::read(&p, e))?);
            }
            hex(&h.finalize())
        } else {
            hex(&Sha256::digest(std::fs::read(path).map_err(|e| CliError::read(path, e))?))
        };
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn output(&mut self, name: &str) {
        self.outputs.push(name.into());
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::write(&path, e))
    }
}

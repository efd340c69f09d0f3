//! Run manifests: every CLI command records its resolved configuration,
//! input digests, seed, and artifact paths next to its outputs so a run can
//! be reproduced bit-for-bit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    pub artifacts: Vec<String>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            config,
            inputs: Vec::new(),
            seed,
            artifacts: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn add_input(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = std::fs::read(&path)?;
        let digest = Sha256::digest(&bytes);
        self.inputs.push(InputDigest {
            path: path.as_ref().display().to_string(),
            sha256: hex_string(&digest),
        });
        Ok(())
    }

    pub fn add_artifact(&mut self, path: impl AsRef<Path>) {
        self.artifacts.push(path.as_ref().display().to_string());
    }

    /// Writes `<artifact>.manifest.json` next to the named artifact.
    pub fn write_next_to(&self, artifact: impl AsRef<Path>) -> Result<()> {
        let mut path = artifact.as_ref().as_os_str().to_owned();
        path.push(".manifest.json");
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json)?;
        Ok(())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

//! Artifact manifests: every output file with its SHA-256, so runs can be
//! compared byte for byte. Manifests carry no timestamps.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the configuration file as given.
    pub config_sha256: String,
    pub artifacts: BTreeMap<String, Artifact>,
    /// Free-form values useful when auditing a run.
    pub debug: BTreeMap<String, serde_json::Value>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config_bytes: &[u8]) -> Self {
        Self {
            command: command.into(),
            seed,
            config_sha256: sha256_hex(config_bytes),
            ..Default::default()
        }
    }

    /// Hashes `dir/rel` and records it under `name`.
    pub fn add_file(&mut self, name: &str, dir: &Path, rel: &str) -> Result<()> {
        let bytes = std::fs::read(dir.join(rel))?;
        self.artifacts.insert(
            name.into(),
            Artifact {
                path: rel.into(),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            },
        );
        Ok(())
    }

    pub fn set_debug(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        let v = serde_json::to_value(value).map_err(|e| Error::Format(e.to_string()))?;
        self.debug.insert(key.into(), v);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_slice(&std::fs::read(path)?).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Names of artifacts whose file under `dir` no longer matches its hash.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut stale = Vec::new();
        for (name, a) in &self.artifacts {
            if sha256_file(&dir.join(&a.path))? != a.sha256 {
                stale.push(name.clone());
            }
        }
        Ok(stale)
    }
}

//! Run manifests: the resolved config and a SHA-256 digest per artifact.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::table::Table;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: serde_json::Value,
    pub seed: u64,
    pub threads: usize,
    pub version: String,
    /// Artifact path relative to the run directory → hex SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes artifacts into a run directory and remembers their names.
pub struct ArtifactWriter {
    dir: PathBuf,
    names: Vec<String>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            names: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn target(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
        }
        self.names.push(name.to_string());
        Ok(path)
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.target(name)?;
        fs::write(&path, body).map_err(|e| HarnessError::io(&path, e))
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        let path = self.target(name)?;
        table.write(&path)
    }

    pub fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }

    /// Hashes every artifact and writes `manifest.json` next to them.
    pub fn finish(self, cfg: &ExperimentConfig) -> Result<Manifest> {
        let mut artifacts = BTreeMap::new();
        for name in &self.names {
            artifacts.insert(name.clone(), sha256_file(&self.dir.join(name))?);
        }
        let manifest = Manifest {
            config: cfg.to_json(),
            seed: cfg.seed,
            threads: rayon::current_num_threads(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            artifacts,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let mut body = serde_json::to_string_pretty(&manifest)?;
        body.push('\n');
        fs::write(&path, body).map_err(|e| HarnessError::io(&path, e))?;
        Ok(manifest)
    }
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Record of one command run, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// SHA-256 of every output file, keyed like `outputs`.
    pub output_sha256: BTreeMap<String, String>,
    pub duration_secs: f64,
}

/// Collects manifest fields while a command runs.
pub struct ManifestBuilder {
    manifest: RunManifest,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        Self {
            manifest: RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config: BTreeMap::new(),
                seeds: BTreeMap::new(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                output_sha256: BTreeMap::new(),
                duration_secs: 0.0,
            },
            started: Instant::now(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.manifest.config.insert(key.to_string(), value.to_string());
        self
    }

    pub fn seed(&mut self, key: &str, seed: u64) -> &mut Self {
        self.manifest.seeds.insert(key.to_string(), seed);
        self
    }

    pub fn input(&mut self, key: &str, path: &Path) -> &mut Self {
        self.manifest.inputs.insert(key.to_string(), path.display().to_string());
        self
    }

    pub fn output(&mut self, key: &str, path: &Path) -> &mut Self {
        self.manifest.outputs.insert(key.to_string(), path.display().to_string());
        self
    }

    /// Hashes the outputs, stamps the duration and writes the manifest to `path`.
    pub fn finish(mut self, path: &Path) -> Result<RunManifest> {
        for (key, out) in &self.manifest.outputs {
            let p = PathBuf::from(out);
            let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
            self.manifest.output_sha256.insert(key.clone(), format!("{:x}", Sha256::digest(&bytes)));
        }
        self.manifest.duration_secs = self.started.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;
        Ok(self.manifest)
    }
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// `<file>.manifest.json` next to a single-file output.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

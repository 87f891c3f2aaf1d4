use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_millis() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetRef {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
}

/// Provenance of one command run. `id` depends only on the command, the
/// configuration, the input bytes, the seed and the toolkit version, so
/// reruns with the same inputs carry the same id.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub id: String,
    pub command: String,
    pub args: Vec<String>,
    pub config: Value,
    pub datasets: Vec<DatasetRef>,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<String>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

impl RunManifest {
    pub fn begin(command: &str, config: Value, datasets: Vec<DatasetRef>, seed: Option<u64>) -> Self {
        let version = env!("CARGO_PKG_VERSION").to_string();
        let key = serde_json::json!({
            "command": command,
            "config": config,
            "datasets": datasets.iter().map(|d| &d.sha256).collect::<Vec<_>>(),
            "seed": seed,
            "version": version,
        });
        RunManifest {
            id: sha256_hex(key.to_string().as_bytes()),
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            config,
            datasets,
            seed,
            version,
            outputs: Vec::new(),
            started_unix_ms: unix_millis(),
            finished_unix_ms: 0,
        }
    }
}

/// Collects the files a command writes and, last, its manifest.
pub struct Outputs {
    dir: PathBuf,
    pub manifest: RunManifest,
}

impl Outputs {
    pub fn new(dir: &Path, manifest: RunManifest) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs { dir: dir.to_path_buf(), manifest })
    }

    pub fn id(&self) -> String {
        self.manifest.id.clone()
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path(name);
        self.write_path(&path, bytes)?;
        Ok(path)
    }

    /// Writes to an explicit path, which is recorded as given.
    pub fn write_path(&mut self, path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(path.display().to_string());
        Ok(())
    }

    /// Writes `manifest_<label>.json` and returns its path.
    pub fn finish(mut self, label: &str) -> Result<PathBuf> {
        self.manifest.finished_unix_ms = unix_millis();
        let path = self.path(&format!("manifest_{label}.json"));
        let json = serde_json::to_string_pretty(&self.manifest)? + "\n";
        std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

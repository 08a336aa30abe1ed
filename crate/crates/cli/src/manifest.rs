//! Run manifests: resolved parameters, files read and written with their
//! SHA-256, and wall-clock time, as pretty JSON.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileEntry {
    pub fn of(path: &Path) -> CliResult<Self> {
        let data = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self { path: path.display().to_string(), bytes: data.len() as u64, sha256: sha256_hex(&data) })
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub duration_seconds: f64,
}

/// Collects a manifest while a command runs.
#[derive(Debug)]
pub struct Recorder {
    command: String,
    started: Instant,
    parameters: BTreeMap<String, serde_json::Value>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            started: Instant::now(),
            parameters: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.parameters.insert(key.to_string(), v);
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn outputs(&self) -> &[PathBuf] {
        &self.outputs
    }

    /// Hash everything recorded and write the manifest to `path`.
    pub fn finish(self, path: &Path) -> CliResult<Manifest> {
        let entries = |v: &[PathBuf]| v.iter().map(|p| FileEntry::of(p)).collect::<CliResult<Vec<_>>>();
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            parameters: self.parameters,
            inputs: entries(&self.inputs)?,
            outputs: entries(&self.outputs)?,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))?;
        Ok(manifest)
    }
}

pub fn read_manifest(path: &Path) -> CliResult<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// `<path>.manifest.json`
pub fn default_path(primary: &Path) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

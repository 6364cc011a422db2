//! Run manifests and atomic file output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{PipelineConfig, Seeds};
use crate::error::{CliError, Result};

pub const MANIFEST_SCHEMA: &str = "ldp.run_manifest/v1";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| CliError::Config(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    pub config_hash: String,
    pub seeds: Seeds,
    /// SHA-256 of every file read, keyed by path as given.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every file written, keyed by file name.
    pub outputs: BTreeMap<String, String>,
    pub wall_time_s: f64,
    pub metrics: serde_json::Value,
}

/// Collects inputs and outputs while a command runs.
#[derive(Debug)]
pub struct Recorder {
    out: PathBuf,
    manifest: RunManifest,
    start: Instant,
}

impl Recorder {
    /// Creates `out` if needed.
    pub fn new(command: &str, cfg: &PipelineConfig, out: &Path) -> Result<Self> {
        fs::create_dir_all(out)?;
        Ok(Self {
            out: out.to_path_buf(),
            manifest: RunManifest {
                schema: MANIFEST_SCHEMA.into(),
                command: command.into(),
                config_hash: cfg.hash(),
                seeds: cfg.seeds(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                wall_time_s: 0.0,
                metrics: serde_json::Value::Null,
            },
            start: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.out
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.manifest.inputs.insert(path.display().to_string(), sha256_hex(bytes));
    }

    /// Writes `name` inside the output directory and records its digest.
    pub fn output(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out.join(name);
        write_atomic(&path, bytes)?;
        self.manifest.outputs.insert(name.into(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn finish(mut self, metrics: serde_json::Value) -> Result<RunManifest> {
        self.manifest.metrics = metrics;
        self.manifest.wall_time_s = self.start.elapsed().as_secs_f64();
        let mut json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        json.push('\n');
        write_atomic(&self.out.join(MANIFEST_FILE), json.as_bytes())?;
        Ok(self.manifest)
    }
}

//! Output staging and the run manifest.
//!
//! Files are collected in memory, written under temporary names and renamed
//! into place only once every one of them has been written.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_fingerprint: Option<String>,
}

impl InputRecord {
    pub fn new(path: &Path, bytes: &[u8], scenario_fingerprint: Option<String>) -> Self {
        InputRecord { path: path.display().to_string(), sha256: sha256_hex(bytes), scenario_fingerprint }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub tool_version: String,
    pub library_version: String,
    pub created_at: String,
    pub threads: usize,
    pub config: Value,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<OutputRecord>,
    pub warnings: Vec<String>,
}

pub struct Staged {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Staged {
    pub fn new(dir: PathBuf) -> Self {
        Staged { dir, files: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    /// Append a manifest describing the staged files, then write everything.
    pub fn commit(
        mut self,
        command: &str,
        config: Value,
        inputs: Vec<InputRecord>,
        warnings: Vec<String>,
    ) -> Result<Vec<PathBuf>, CliError> {
        let outputs = self
            .files
            .iter()
            .map(|(name, bytes)| OutputRecord { name: name.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() })
            .collect();
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            library_version: pareto_region::region::TOOL_VERSION.to_string(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            threads: rayon::current_num_threads(),
            config,
            inputs,
            outputs,
            warnings,
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serialization is infallible");
        self.files.push((MANIFEST_NAME.to_string(), (json + "\n").into_bytes()));
        self.write_all()
    }

    fn write_all(self) -> Result<Vec<PathBuf>, CliError> {
        let dir = &self.dir;
        fs::create_dir_all(dir).map_err(|e| CliError::Validation(format!("{}: {e}", dir.display())))?;
        let pid = std::process::id();
        let mut temps = Vec::new();
        let result = (|| {
            for (name, bytes) in &self.files {
                let tmp = dir.join(format!(".{name}.tmp-{pid}"));
                temps.push((tmp.clone(), dir.join(name)));
                fs::write(&tmp, bytes).map_err(|e| CliError::Validation(format!("{}: {e}", tmp.display())))?;
            }
            for (tmp, dest) in &temps {
                fs::rename(tmp, dest).map_err(|e| CliError::Validation(format!("{}: {e}", dest.display())))?;
            }
            Ok(())
        })();
        if result.is_err() {
            for (tmp, _) in &temps {
                let _ = fs::remove_file(tmp);
            }
        }
        result.map(|_| temps.into_iter().map(|(_, d)| d).collect())
    }
}

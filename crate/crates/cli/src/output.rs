//! Report plumbing: resolved configs, their hashes, and atomic file writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL: &str = "attrishift";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of an input file, recorded in the config so a changed input
/// changes the hash.
pub fn file_digest(path: &Path) -> Result<Value, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(json!({ "path": path.display().to_string(), "sha256": sha256_hex(&bytes) }))
}

/// The resolved configuration of one run. The output directory is left out
/// of the hash so the same config written elsewhere hashes the same.
pub struct Run {
    pub config: Value,
    pub hash: String,
    pub seed: u64,
    pub out: PathBuf,
    pub json_only: bool,
}

impl Run {
    pub fn new(config: Value, seed: u64, out: &Path, json_only: bool) -> Result<Self, CliError> {
        let canonical = serde_json::to_vec(&config).map_err(CliError::internal)?;
        std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        Ok(Self {
            hash: sha256_hex(&canonical),
            config,
            seed,
            out: out.to_path_buf(),
            json_only,
        })
    }

    fn header(&self) -> Value {
        json!({
            "tool": TOOL,
            "version": VERSION,
            "config_hash": self.hash,
            "seed": self.seed,
        })
    }

    /// Writes `{header, config, result}` as pretty JSON.
    pub fn write_report<T: Serialize>(&self, name: &str, result: &T) -> Result<PathBuf, CliError> {
        let mut doc = self.header();
        doc["config"] = self.config.clone();
        doc["result"] = serde_json::to_value(result).map_err(CliError::internal)?;
        let mut bytes = serde_json::to_vec_pretty(&doc).map_err(CliError::internal)?;
        bytes.push(b'\n');
        self.write_file(name, &bytes)
    }

    /// Writes a CSV plus a `<name>.manifest.json` sidecar naming the run.
    /// Skipped under `--json-only`.
    pub fn write_csv(
        &self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> attrishift::Result<()>,
    ) -> Result<Option<PathBuf>, CliError> {
        if self.json_only {
            return Ok(None);
        }
        let mut bytes = Vec::new();
        fill(&mut bytes)?;
        let path = self.write_file(name, &bytes)?;
        let mut manifest = self.header();
        manifest["file"] = json!(name);
        manifest["sha256"] = json!(sha256_hex(&bytes));
        let mut m = serde_json::to_vec_pretty(&manifest).map_err(CliError::internal)?;
        m.push(b'\n');
        self.write_file(&format!("{name}.manifest.json"), &m)?;
        Ok(Some(path))
    }

    fn write_file(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        tmp.write_all(bytes).map_err(|e| CliError::io(&path, e))?;
        tmp.as_file().sync_all().map_err(|e| CliError::io(&path, e))?;
        tmp.persist(&path).map_err(|e| CliError::io(&path, e.error))?;
        Ok(path)
    }
}

//! Atomic output files, each paired with a `<name>.meta.json` sidecar that
//! records the run configuration and its hash.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub seed: u64,
    /// Hex digest of the curve file contents, when a curve is read.
    pub curve_sha256: Option<String>,
    pub args: Value,
}

impl RunConfig {
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub struct Outputs {
    dir: PathBuf,
    config: RunConfig,
    hash: String,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path, config: RunConfig) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("cannot create output directory {}: {e}", dir.display())))?;
        let hash = config.hash();
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            hash,
            written: Vec::new(),
        })
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        atomic_write(&self.dir, &path, contents.as_bytes())?;
        let meta = json!({
            "file": name,
            "sha256": sha256_hex(contents.as_bytes()),
            "config_hash": self.hash,
            "config": self.config,
        });
        let meta_path = self.dir.join(format!("{name}.meta.json"));
        atomic_write(&self.dir, &meta_path, pretty(&meta).as_bytes())?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> Result<PathBuf, CliError> {
        self.write(name, &pretty(value))
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

pub fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json serializes");
    s.push('\n');
    s
}

fn atomic_write(dir: &Path, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Output(format!("writing {}: {e}", path.display()));
    let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

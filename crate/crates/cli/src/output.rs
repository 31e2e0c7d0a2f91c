use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

const LOCK_NAME: &str = ".xgraph.lock";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Output directory held under a lock file for the lifetime of the run.
/// Records every file written and every input read for the metadata sidecar.
pub struct RunDir {
    dir: PathBuf,
    lock: PathBuf,
    outputs: Vec<String>,
    inputs: BTreeMap<String, String>,
    extra: BTreeMap<String, Value>,
}

impl RunDir {
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let lock = dir.join(LOCK_NAME);
        OpenOptions::new().write(true).create_new(true).open(&lock).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                CliError::data(format!(
                    "{} is locked by another run (remove {} if stale)",
                    dir.display(),
                    lock.display()
                ))
            } else {
                CliError::io(&lock, e)
            }
        })?;
        Ok(RunDir {
            dir: dir.to_path_buf(),
            lock,
            outputs: Vec::new(),
            inputs: BTreeMap::new(),
            extra: BTreeMap::new(),
        })
    }

    /// Reads an input file and records its hash.
    pub fn read(&mut self, path: &Path) -> Result<String, CliError> {
        let text = read_input(path)?;
        self.inputs.insert(path.display().to_string(), sha256_hex(text.as_bytes()));
        Ok(text)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: Value) {
        self.extra.insert(key.to_string(), value);
    }

    /// Writes `<command>.meta.json`. No timestamps, so reruns are
    /// byte-identical.
    pub fn finish(mut self, command: &str, cfg: &RunConfig) -> Result<(), CliError> {
        let meta = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": cfg.echo,
            "seed": cfg.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "details": self.extra,
        });
        let text = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
        let name = format!("{command}.meta.json");
        self.write(&name, &text)
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

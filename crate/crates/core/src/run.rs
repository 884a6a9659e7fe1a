//! Provenance record for one command invocation.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PipelineRun {
    pub command: String,
    /// Every flag as given, after defaults were applied.
    pub config: BTreeMap<String, String>,
    pub seed: Option<u64>,
    /// Input path to hex SHA-256 of its contents.
    pub inputs: BTreeMap<PathBuf, String>,
    pub outputs: Vec<PathBuf>,
    pub duration_ms: u128,
}

impl PipelineRun {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            config: BTreeMap::new(),
            seed: None,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            duration_ms: 0,
        }
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.config.insert(name.to_owned(), value.to_string());
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let digest = file_digest(path)?;
        self.inputs.insert(path.to_path_buf(), digest);
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.to_path_buf());
        self
    }

    pub fn finish(&mut self, elapsed: Duration) {
        self.duration_ms = elapsed.as_millis();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("run record serializes")
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

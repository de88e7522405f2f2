//! Run manifests and input sources.
//!
//! A manifest is written next to a command's primary output before any long
//! work starts, then rewritten with `finished_at` once the run completes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use aged_core::synthetic;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Where a dataset file comes from: disk, or the bundled mini-FrameNet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    File(PathBuf),
    Bundled(&'static str),
}

impl Source {
    pub fn or_bundled(path: Option<PathBuf>, name: &'static str) -> Self {
        path.map_or(Source::Bundled(name), Source::File)
    }

    pub fn label(&self) -> String {
        match self {
            Source::File(p) => p.display().to_string(),
            Source::Bundled(name) => format!("<bundled>/{name}"),
        }
    }

    pub fn read(&self) -> Result<Vec<u8>, CliError> {
        match self {
            Source::File(path) => std::fs::read(path)
                .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display()))),
            Source::Bundled(name) => {
                let text = match *name {
                    "frames.jsonl" => synthetic::FRAMES_JSONL,
                    "train.jsonl" => synthetic::TRAIN_JSONL,
                    "dev.jsonl" => synthetic::DEV_JSONL,
                    "test.jsonl" => synthetic::TEST_JSONL,
                    other => return Err(CliError::Runtime(format!("no bundled file '{other}'"))),
                };
                Ok(text.as_bytes().to_vec())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, serde_json::Value>,
    /// Input label to SHA-256 of its exact bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub started_at: String,
    pub finished_at: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            version: aged_core::VERSION.to_string(),
            argv: std::env::args().collect(),
            seed: None,
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            started_at: now(),
            finished_at: None,
        }
    }

    pub fn add_input(&mut self, label: String, bytes: &[u8]) {
        self.inputs.insert(label, sha256_hex(bytes));
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
    }

    pub fn finish(&mut self, path: &Path) -> Result<(), CliError> {
        self.finished_at = Some(now());
        self.write(path)
    }
}

/// Refuses to clobber existing outputs unless `force` is set.
pub fn guard_outputs(paths: &[&Path], force: bool) -> Result<(), CliError> {
    if force {
        return Ok(());
    }
    for path in paths {
        if path.exists() {
            return Err(CliError::Validation(format!(
                "{} already exists; pass --force to overwrite",
                path.display()
            )));
        }
    }
    Ok(())
}

/// Creates the parent directory of `path` if needed.
pub fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display()))),
        None => Ok(()),
    }
}

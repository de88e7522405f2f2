//! Flat `key = value` configuration files and flag/file/default resolution.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

/// Every key any subcommand reads; anything else in a file is warned about.
pub const KNOWN_KEYS: &[&str] = &[
    "augment_fe_defs",
    "batch_size",
    "checkpoint",
    "d_ff",
    "d_model",
    "dev",
    "dropout",
    "dtype",
    "epochs",
    "eval_every",
    "fe",
    "frame",
    "frames",
    "gold",
    "heads",
    "held_out",
    "instances",
    "k",
    "layers",
    "lr",
    "max_len",
    "mode",
    "no_label_markers",
    "no_target_markers",
    "out",
    "pred",
    "seed",
    "test",
    "train",
    "workers",
];

/// Resolves each setting as flag, else config file, else default, and
/// records the outcome for the run manifest.
#[derive(Debug, Default)]
pub struct Resolver {
    file: BTreeMap<String, toml::Value>,
    resolved: BTreeMap<String, serde_json::Value>,
}

impl Resolver {
    pub fn from_file(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Resolver::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse_text(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    pub fn parse_text(text: &str) -> Result<Self, String> {
        let table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
        let mut file = BTreeMap::new();
        for (key, value) in table {
            if matches!(value, toml::Value::Table(_) | toml::Value::Array(_)) {
                return Err(format!("key '{key}' must be a plain value"));
            }
            file.insert(key, value);
        }
        let known: BTreeSet<&str> = KNOWN_KEYS.iter().copied().collect();
        for key in file.keys().filter(|k| !known.contains(k.as_str())) {
            log::warn!("ignoring unknown config key '{key}'");
        }
        Ok(Resolver {
            file,
            resolved: BTreeMap::new(),
        })
    }

    fn file_value<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.file
            .get(key)
            .map(|v| {
                v.clone()
                    .try_into()
                    .map_err(|e| CliError::Validation(format!("config key '{key}': {e}")))
            })
            .transpose()
    }

    /// Overrides the recorded value of `key`, e.g. with a derived default.
    pub fn set<T: Serialize>(&mut self, key: &str, value: T) {
        self.record(key, &value);
    }

    fn record<T: Serialize>(&mut self, key: &str, value: &T) {
        let json = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.resolved.insert(key.to_string(), json);
    }

    pub fn value<T: DeserializeOwned + Serialize>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, CliError> {
        let value = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.record(key, &value);
        Ok(value)
    }

    /// A setting with no default; `None` when neither flag nor file sets it.
    pub fn optional<T: DeserializeOwned + Serialize>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>, CliError> {
        let value = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        self.record(key, &value);
        Ok(value)
    }

    /// A boolean switch: present on the command line wins, else the file.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        let value = flag || self.file_value(key)?.unwrap_or(false);
        self.record(key, &value);
        Ok(value)
    }

    /// Parses a textual setting with `parse`, recording the original text.
    pub fn parsed<T>(
        &mut self,
        key: &str,
        flag: Option<String>,
        default: &str,
        parse: impl FnOnce(&str) -> Result<T, String>,
    ) -> Result<T, CliError> {
        let text = self.value(key, flag, default.to_string())?;
        parse(&text).map_err(|e| CliError::Validation(format!("{key}: {e}")))
    }

    pub fn resolved(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.resolved
    }
}

//! JSON run reports and input fingerprints.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{PolarError, Result};

/// One evaluation run: `{task, dataset, n_used, n_skipped, metrics, config}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub task: String,
    pub dataset: String,
    pub n_used: usize,
    pub n_skipped: usize,
    pub metrics: BTreeMap<String, Value>,
    pub config: Value,
}

impl Report {
    pub fn new(task: impl Into<String>, dataset: impl Into<String>) -> Self {
        Report {
            task: task.into(),
            dataset: dataset.into(),
            n_used: 0,
            n_skipped: 0,
            metrics: BTreeMap::new(),
            config: Value::Null,
        }
    }

    pub fn metric(mut self, name: &str, value: impl Serialize) -> Result<Self> {
        self.metrics.insert(name.to_owned(), serde_json::to_value(value)?);
        Ok(self)
    }

    pub fn counts(mut self, n_used: usize, n_skipped: usize) -> Self {
        self.n_used = n_used;
        self.n_skipped = n_skipped;
        self
    }

    pub fn with_config(mut self, config: Value) -> Self {
        self.config = config;
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Hex SHA-256 of a file's contents.
pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut reader = BufReader::with_capacity(
        1 << 20,
        File::open(path).map_err(|e| PolarError::io(path, e))?,
    );
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = reader.read(&mut buf).map_err(|e| PolarError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Writes `value` as pretty JSON to `path`, or stdout when `path` is `None`.
pub fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| PolarError::io(p, e)),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| PolarError::io("<stdout>", e)),
    }
}

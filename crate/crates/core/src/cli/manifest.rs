use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the canonical (key-sorted, compact) JSON config.
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Digest of `config` that ignores key order and whitespace.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    // `Value` keeps object keys sorted, so its compact form is canonical.
    let value = serde_json::to_value(config).expect("config serializes");
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn start<T: Serialize>(command: &str, config: &T, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_hash: config_hash(config),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
            outputs: Vec::new(),
        }
    }

    /// Stamp the finish time and write `manifest.json` into `dir`, or print it
    /// to stderr when there is no output directory.
    pub fn finish(mut self, dir: Option<&Path>) -> Result<()> {
        self.finished_unix_ms = now_ms();
        match dir {
            Some(dir) => {
                self.outputs.push("manifest.json".into());
                let path = dir.join("manifest.json");
                let text = serde_json::to_string_pretty(&self)?;
                fs::write(&path, text + "\n").map_err(|e| Error::io(path, e))
            }
            None => {
                eprintln!("manifest: {}", serde_json::to_string(&self)?);
                Ok(())
            }
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_json<T: Serialize>(dir: &Path, rel: &str, value: &T, m: &mut RunManifest) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    m.outputs.push(rel.to_string());
    Ok(())
}

/// Write rows produced by `fill` as CSV at `dir/rel`.
pub fn write_csv(
    dir: &Path,
    rel: &str,
    m: &mut RunManifest,
    fill: impl FnOnce(&mut csv::Writer<fs::File>) -> csv::Result<()>,
) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(&path, io),
        other => Error::io(&path, std::io::Error::other(format!("{other:?}"))),
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    fill(&mut w).map_err(csv_err)?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    m.outputs.push(rel.to_string());
    Ok(())
}

//! Provenance attached to every emitted report.

use std::fs;
use std::path::Path;
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Everything needed to regenerate a report: the subcommand, its fully
/// resolved settings, the input checksum and the base seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Resolved settings with every default filled in.
    pub config: serde_json::Value,
    pub dataset_checksum: Option<String>,
    pub version: String,
    pub base_seed: u64,
    /// RFC 3339, UTC.
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(
        subcommand: impl Into<String>,
        config: &impl Serialize,
        dataset_checksum: Option<String>,
        base_seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            subcommand: subcommand.into(),
            config: serde_json::to_value(config)?,
            dataset_checksum,
            version: env!("CARGO_PKG_VERSION").to_string(),
            base_seed,
            timestamp: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
        })
    }
}

/// Writes `value` as pretty JSON, creating parent directories.
pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Creates `path` (and parents) and hands the open file to `emit`.
pub fn write_with(path: impl AsRef<Path>, emit: impl FnOnce(fs::File) -> Result<()>) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    emit(file)
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        }),
        _ => Ok(()),
    }
}

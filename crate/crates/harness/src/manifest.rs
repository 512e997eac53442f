//! Run provenance. Every CLI command drops a small manifest next to its
//! outputs so a run directory is self-describing: which subcommand, which
//! seed, which binary version, and the exact resolved configuration.

use crate::error::{HarnessError, Result};
use cplab_train::RunConfig;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    version: &'a str,
    invocation: &'a str,
    created_unix_secs: u64,
}

/// Write `manifest.toml` (for `train`, which owns the run directory) or
/// `manifest-<command>.toml` (for commands layered on an existing run),
/// plus a `config.toml` snapshot that reloads to the same `RunConfig`.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    cfg: &RunConfig,
    seed: u64,
    invocation: &str,
) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = Manifest {
        command,
        seed,
        version: env!("CARGO_PKG_VERSION"),
        invocation,
        created_unix_secs: created,
    };
    let body = toml::to_string_pretty(&manifest)
        .map_err(|e| HarnessError::Config(format!("manifest serialization: {e}")))?;
    let name = if command == "train" {
        "manifest.toml".to_string()
    } else {
        format!("manifest-{command}.toml")
    };
    let path = out_dir.join(name);
    std::fs::write(&path, body)?;

    let snapshot = cfg.to_toml_string()?;
    std::fs::write(out_dir.join("config.toml"), snapshot)?;
    Ok(path)
}

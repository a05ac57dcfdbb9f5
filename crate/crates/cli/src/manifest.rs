use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use qcqmc_core::config::RunConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the compact JSON form of the resolved configuration, with
/// the output section left out so relocated runs hash alike.
pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    let mut value = serde_json::to_value(cfg)?;
    if let Some(map) = value.as_object_mut() {
        map.remove("output");
    }
    let text = serde_json::to_string(&value)?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub schema_version: u32,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: &'a str,
    pub argv: Vec<String>,
    pub config: Option<&'a RunConfig>,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub outputs: Vec<String>,
    pub wall_time_seconds: f64,
    pub timestamp_unix: u64,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, config: Option<&'a RunConfig>, outputs: Vec<String>, elapsed: Duration) -> Result<Self> {
        Ok(Manifest {
            schema_version: 1,
            tool: "qcqmc",
            tool_version: TOOL_VERSION,
            command,
            argv: std::env::args().collect(),
            config,
            config_hash: config.map(config_hash).transpose()?,
            seed: config.map(|c| c.experiment.base_seed),
            threads: rayon::current_num_threads(),
            outputs,
            wall_time_seconds: elapsed.as_secs_f64(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("run_manifest.json"), self)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

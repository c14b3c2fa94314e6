//! Run manifests: the resolved snapshot written next to every output set.
//!
//! A manifest is written (status `running`) before integration starts and
//! rewritten on completion; re-running a command from a manifest reproduces
//! the CSV/JSONL outputs byte for byte, since everything that feeds the
//! integrator — config snapshot, seed, stream ids — is stored in it.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use etadrc_core::config::RunConfig;
use etadrc_core::gains::ValidationReport;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub created_unix_ms: u128,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence_time: Option<f64>,
    pub config: RunConfig,
    pub seed: u64,
    pub stream_ids: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_start: Option<f64>,
    pub outputs: Vec<String>,
    pub validation_digest: String,
}

impl RunManifest {
    pub fn new(command: &str, config: RunConfig, seed: u64, report: &ValidationReport) -> Self {
        let created_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            created_unix_ms,
            status: "running".to_string(),
            divergence_time: None,
            config,
            seed,
            stream_ids: Vec::new(),
            r_values: None,
            mc_paths: None,
            window_start: None,
            outputs: Vec::new(),
            validation_digest: validation_digest(report),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).context("serializing manifest")?;
        std::fs::write(path, json.as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Stable digest of a validation report (hex SHA-256 of its JSON form).
pub fn validation_digest(report: &ValidationReport) -> String {
    let json = serde_json::to_string(report).expect("validation report serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

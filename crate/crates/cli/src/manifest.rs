use anyhow::{Context, Result};
use lifelong_core::experiment::ExperimentConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "lifelong";

/// Everything needed to rerun an experiment bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub layout_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub machine_sha256: Option<String>,
    pub experiment: ExperimentConfig,
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Manifest {
    pub fn new(experiment: ExperimentConfig) -> Self {
        Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            layout_sha256: sha256_hex(experiment.layout_text()),
            machine_sha256: experiment.machine.as_deref().map(sha256_hex),
            experiment,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    /// Reads either a manifest or a bare experiment config.
    pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
        let table: toml::Table = text.parse().context("not valid TOML")?;
        if !table.contains_key("experiment") {
            return Ok(ExperimentConfig::from_toml(text)?);
        }
        let manifest: Manifest = toml::from_str(text).context("malformed manifest")?;
        if manifest.layout_sha256 != sha256_hex(manifest.experiment.layout_text()) {
            anyhow::bail!("layout does not match layout_sha256");
        }
        if manifest.machine_sha256 != manifest.experiment.machine.as_deref().map(sha256_hex) {
            anyhow::bail!("machine does not match machine_sha256");
        }
        if manifest.version != env!("CARGO_PKG_VERSION") {
            eprintln!(
                "warning: manifest written by {} {}, this is {}",
                manifest.tool,
                manifest.version,
                env!("CARGO_PKG_VERSION")
            );
        }
        Ok(manifest.experiment)
    }
}

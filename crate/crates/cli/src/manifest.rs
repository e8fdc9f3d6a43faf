use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST_VERSION: u32 = 1;

/// Enough to re-run a command: `arguments` replays it, and the embedded
/// config (which carries the seed) can itself be passed as `--config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub command: String,
    /// SHA-256 of the command name and the canonical config JSON (or the
    /// argument list when there is no config).
    pub config_digest: String,
    pub master_seed: u64,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub arguments: Vec<String>,
    pub outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
}

pub fn digest(command: &str, config: &RunConfig) -> Result<String, CliError> {
    let body = serde_json::to_vec(config).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(digest_bytes(command, &body))
}

fn digest_bytes(command: &str, body: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0u8]);
    h.update(body);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: Option<&RunConfig>,
        master_seed: u64,
        started_at: String,
        outputs: Vec<PathBuf>,
    ) -> Result<Self, CliError> {
        let arguments: Vec<String> = std::env::args().collect();
        let config_digest = match config {
            Some(c) => digest(command, c)?,
            None => digest_bytes(command, arguments.get(1..).unwrap_or_default().join("\0").as_bytes()),
        };
        Ok(Self {
            manifest_version: MANIFEST_VERSION,
            command: command.to_string(),
            config_digest,
            master_seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at,
            finished_at: now(),
            arguments,
            outputs,
            config: config.cloned(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

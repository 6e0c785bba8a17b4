//! Run manifests embedded in every report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the effective configuration, serialized as compact JSON.
    pub config_digest: String,
    /// SHA-256 of every input file, keyed by the path as given.
    pub input_digests: BTreeMap<String, String>,
    pub versions: BTreeMap<String, String>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub struct ManifestBuilder {
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn start(command: &str, seed: u64) -> Self {
        let versions = BTreeMap::from([
            ("tdshift".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("schema".to_string(), tdshift_core::io::SCHEMA_VERSION.to_string()),
        ]);
        Self {
            manifest: RunManifest {
                schema_version: tdshift_core::io::SCHEMA_VERSION,
                command: command.to_string(),
                seed,
                config_digest: String::new(),
                input_digests: BTreeMap::new(),
                versions,
                started_at: now(),
                finished_at: String::new(),
            },
        }
    }

    pub fn config<T: Serialize>(&mut self, config: &T) {
        let json = serde_json::to_vec(config).expect("configs serialize");
        self.manifest.config_digest = sha256_hex(&json);
    }

    /// Records the digest of an input file. Unreadable files are left to the
    /// reader to report.
    pub fn input(&mut self, path: &Path) {
        if let Ok(bytes) = std::fs::read(path) {
            self.manifest
                .input_digests
                .insert(path.display().to_string(), sha256_hex(&bytes));
        }
    }

    pub fn finish(mut self) -> RunManifest {
        self.manifest.finished_at = now();
        self.manifest
    }
}

/// A result together with the manifest of the run that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    pub manifest: RunManifest,
    pub result: T,
}

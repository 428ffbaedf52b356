use crate::output::Format;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

pub const MANIFEST_VERSION: u32 = 1;

/// Everything needed to reproduce one run and verify its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub command: String,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    /// The parsed command with every default filled in.
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub format: Format,
    pub digits: usize,
    pub versions: BTreeMap<String, String>,
    pub outputs: Vec<OutputChecksum>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputChecksum {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

impl OutputChecksum {
    pub fn of(name: &str, data: &[u8]) -> Self {
        Self {
            name: name.to_string(),
            bytes: data.len(),
            sha256: sha256_hex(data),
        }
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("drawdown-core".to_string(), drawdown_core::VERSION.to_string()),
        ("ddfreq".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ])
}

//! Run manifests: the configuration and input digests behind every output.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

/// Everything needed to reproduce an output. Contains no timestamps or
/// host details, so identical runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    pub inputs: Vec<InputDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &str, config: Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            inputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, name: impl Into<String>, bytes: &[u8]) {
        self.inputs.push(InputDigest {
            name: name.into(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn add_digest(&mut self, name: impl Into<String>, sha256: String) {
        self.inputs.push(InputDigest {
            name: name.into(),
            sha256,
        });
    }

    pub fn add_path(&mut self, path: &Path, bytes: &[u8]) {
        self.add_input(path.display().to_string(), bytes);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// One-line form for text report headers.
    pub fn to_comment(&self) -> String {
        format!("# manifest {}\n", serde_json::to_string(self).expect("manifest serializes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_input() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_is_stable() {
        let mut m = RunManifest::new("eval", serde_json::json!({"tp_iou": 0.5}));
        m.add_input("gt", b"abc");
        assert_eq!(m.to_json(), m.clone().to_json());
        assert!(m.to_comment().starts_with("# manifest {\"tool\":\"reamot-cli\""));
    }
}

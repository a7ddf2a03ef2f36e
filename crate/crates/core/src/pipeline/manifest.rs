//! Sidecar manifests recording how an artifact was produced.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::smiles::VOCAB_SHA256;

pub const TOOL: &str = "molspace";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Inputs, seed, configuration hash and output digests of one command.
/// Contains no timestamps, so equal runs give equal manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub vocab_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, config_text: &str) -> Self {
        Manifest {
            tool: TOOL.into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            seed,
            config_hash: sha256_hex(config_text.as_bytes()),
            vocab_sha256: VOCAB_SHA256.into(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, name: &str, bytes: &[u8]) {
        self.inputs.insert(name.into(), sha256_hex(bytes));
    }

    pub fn output(&mut self, name: &str, bytes: &[u8]) {
        self.outputs.insert(name.into(), sha256_hex(bytes));
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Fails when the manifest was written under a different vocabulary.
    pub fn check_vocab(&self) -> Result<()> {
        if self.vocab_sha256 != VOCAB_SHA256 {
            return Err(Error::Data(format!(
                "vocabulary checksum mismatch: artifact {}, build {VOCAB_SHA256}",
                self.vocab_sha256
            )));
        }
        Ok(())
    }
}

/// `<file>.manifest.json` next to `path`.
pub fn manifest_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

/// Reads the sidecar manifest of `path`, if any, and checks its vocabulary.
pub fn check_sidecar(path: &Path) -> Result<Option<Manifest>> {
    let mp = manifest_path(path);
    if !mp.exists() {
        return Ok(None);
    }
    let m: Manifest = serde_json::from_str(&std::fs::read_to_string(&mp)?)
        .map_err(|e| Error::Data(format!("{}: {e}", mp.display())))?;
    m.check_vocab()?;
    Ok(Some(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_and_sidecar() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.jsonl");
        std::fs::write(&data, "x").unwrap();
        assert!(check_sidecar(&data).unwrap().is_none());
        let mut m = Manifest::new("test", Some(1), "cfg");
        m.output("d.jsonl", b"x");
        std::fs::write(manifest_path(&data), m.to_json().unwrap()).unwrap();
        assert_eq!(check_sidecar(&data).unwrap(), Some(m.clone()));
        m.vocab_sha256 = "0".repeat(64);
        std::fs::write(manifest_path(&data), m.to_json().unwrap()).unwrap();
        assert!(check_sidecar(&data).is_err());
    }
}

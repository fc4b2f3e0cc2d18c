//! `manifest.json`: config hash, seed and a hash of every artifact written.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::formats::{self, FormatError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub exit_code: i32,
    pub artifacts: Vec<Artifact>,
    /// Hash over the artifact list; equal for reproducible runs.
    pub artifacts_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects artifacts as they are written.
#[derive(Debug)]
pub struct ArtifactLog {
    root: PathBuf,
    entries: Vec<Artifact>,
}

impl ArtifactLog {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf(), entries: Vec::new() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Hashes a file that has just been written below the root.
    pub fn record(&mut self, path: &Path) -> Result<(), FormatError> {
        let bytes = std::fs::read(path).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })?;
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        let name = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        self.entries.retain(|a| a.path != name);
        self.entries.push(Artifact { path: name, sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn entries(&self) -> &[Artifact] {
        &self.entries
    }

    pub fn finish(
        mut self,
        command: &str,
        config_text: &str,
        seed: u64,
        exit_code: i32,
    ) -> Result<Manifest, FormatError> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let mut h = Sha256::new();
        for a in &self.entries {
            h.update(a.path.as_bytes());
            h.update([0]);
            h.update(a.sha256.as_bytes());
            h.update([0]);
        }
        let manifest = Manifest {
            command: command.to_string(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            seed,
            exit_code,
            artifacts: self.entries,
            artifacts_sha256: hex::encode(h.finalize()),
        };
        formats::write_json(&self.root.join("manifest.json"), &manifest)?;
        Ok(manifest)
    }
}

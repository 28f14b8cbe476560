//! Run manifests and the artifact writer that feeds them.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// sha256 of the resolved configuration below, serialised as JSON.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub threads: usize,
    pub parallel: bool,
    pub inputs: Vec<FileDigest>,
    pub output_dir: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` when set.
    pub started: u64,
    pub finished: u64,
    /// Emitted files relative to the output directory.
    pub artifacts: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn digest_file(path: &Path) -> Result<FileDigest, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

/// Output directory being filled; records a digest for every file written.
pub struct OutputDir {
    pub dir: PathBuf,
    pub artifacts: Vec<FileDigest>,
}

impl OutputDir {
    /// Creates `dir`, refusing a non-empty one unless `force` is set.
    pub fn create(dir: &Path, force: bool) -> Result<Self, CliError> {
        if dir.exists() {
            let mut entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
            if entries.next().is_some() && !force {
                return Err(CliError::Validation(format!(
                    "output directory {} is not empty; pass --force to overwrite",
                    dir.display()
                )));
            }
        }
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Renders with `f` into memory and stores the bytes as `name`.
    pub fn put_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> lgrowth::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.put(name, &buf)
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest, CliError> {
        manifest.output_dir = self.dir.display().to_string();
        manifest.artifacts = self.artifacts;
        manifest.finished = now();
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        text.push('\n');
        let path = self.dir.join(MANIFEST);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

/// Reads the manifest of `dir` and checks every listed artifact against
/// its recorded digest.
pub fn verify(dir: &Path) -> Result<RunManifest, CliError> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Corrupt(format!("{}: {e}", path.display())))?;
    for a in &manifest.artifacts {
        let p = dir.join(&a.path);
        let bytes = std::fs::read(&p).map_err(|e| CliError::io(&p, e))?;
        if sha256_hex(&bytes) != a.sha256 {
            return Err(CliError::Corrupt(format!(
                "checksum mismatch for {} (manifest {}, file has {} bytes, expected {})",
                p.display(),
                a.sha256,
                bytes.len(),
                a.bytes
            )));
        }
    }
    Ok(manifest)
}

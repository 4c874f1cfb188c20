//! Run manifests: what was run and a checksum of every file it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// Subcommand name.
    pub command: String,
    /// Full argument list after the program name.
    pub args: Vec<String>,
    /// Config file given on the command line or through the environment.
    pub config_path: Option<String>,
    /// Effective configuration snapshot inside the output directory.
    pub config_snapshot: Option<String>,
    pub seed: Option<u64>,
    pub output_dir: String,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_file(path: &Path) -> Result<String, ManifestError> {
    let bytes = fs::read(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, output_dir: &Path) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args,
            config_path: None,
            config_snapshot: None,
            seed: None,
            output_dir: output_dir.display().to_string(),
            artifacts: Vec::new(),
        }
    }

    /// Record `relative` (inside `output_dir`) with its current checksum.
    pub fn add_artifact(&mut self, output_dir: &Path, relative: &str) -> Result<(), ManifestError> {
        let sha256 = sha256_file(&output_dir.join(relative))?;
        self.artifacts.retain(|a| a.path != relative);
        self.artifacts.push(Artifact { path: relative.to_string(), sha256 });
        Ok(())
    }

    pub fn write(&self, output_dir: &Path) -> Result<PathBuf, ManifestError> {
        let path = output_dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self).map_err(|source| ManifestError::Json { path: path.clone(), source })?;
        fs::write(&path, json + "\n").map_err(|source| ManifestError::Io { path: path.clone(), source })?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, ManifestError> {
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|source| ManifestError::Json { path: path.to_path_buf(), source })
    }

    /// Artifacts whose checksum in `dir` differs from the recorded one (missing files count).
    pub fn mismatches(&self, dir: &Path) -> Vec<String> {
        self.artifacts
            .iter()
            .filter(|a| sha256_file(&dir.join(&a.path)).map_or(true, |s| s != a.sha256))
            .map(|a| a.path.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), b"abc").unwrap();
        assert_eq!(
            sha256_file(&dir.path().join("a.txt")).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn round_trip_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("out.csv"), b"x\n1\n").unwrap();
        let mut m = RunManifest::new("batch", vec!["--n".into(), "3".into()], dir.path());
        m.seed = Some(4);
        m.add_artifact(dir.path(), "out.csv").unwrap();
        let path = m.write(dir.path()).unwrap();
        let back = RunManifest::read(&path).unwrap();
        assert_eq!(back, m);
        assert!(back.mismatches(dir.path()).is_empty());
        fs::write(dir.path().join("out.csv"), b"x\n2\n").unwrap();
        assert_eq!(back.mismatches(dir.path()), vec!["out.csv".to_string()]);
    }
}

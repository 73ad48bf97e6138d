//! File output helpers: atomic writes, hashing and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Bumped whenever a CSV column set or meaning changes.
pub const SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes to a sibling temporary file, then renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut file =
            fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        file.write_all(contents.as_bytes())?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))
}

/// Scrubs text so it fits in one CSV cell.
pub fn csv_cell(text: &str) -> String {
    text.replace([',', '\n', '\r'], ";")
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub kind: String,
    pub schema_version: u32,
    pub library_version: String,
    pub generator: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub rows: usize,
    pub failed_rows: usize,
    pub files: Vec<OutputFile>,
}

impl Manifest {
    pub fn new(kind: &str, config_text: &str, seeds: Vec<u64>) -> Self {
        Self {
            kind: kind.to_string(),
            schema_version: SCHEMA_VERSION,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            generator: cvsteer::sampling::GENERATOR_ID.to_string(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            seeds,
            rows: 0,
            failed_rows: 0,
            files: Vec::new(),
        }
    }

    /// Writes `contents` under `dir` and records it.
    pub fn emit(&mut self, dir: &Path, relative: &str, contents: &str) -> Result<PathBuf> {
        let path = dir.join(relative);
        write_atomic(&path, contents)?;
        self.files.push(OutputFile {
            path: relative.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(path)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.toml");
        write_atomic(&path, &toml::to_string(self)?)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/file.csv");
        write_atomic(&path, "a").unwrap();
        write_atomic(&path, "b").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "b");
        assert!(!dir.path().join("sub/file.csv.tmp").exists());
    }
}

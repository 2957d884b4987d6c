//! Output directory with a content manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct InputEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    /// `flag`, `config` or `random`.
    pub seed_source: &'static str,
    pub inputs: Vec<InputEntry>,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes plain file names into one directory and records what was written.
pub struct OutDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::internal(&format!("creating {}", root.display()), e))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let plain = Path::new(name).file_name().is_some_and(|f| f == name) && name != MANIFEST;
        if !plain {
            return Err(CliError::Internal(format!("refusing to write {name:?} outside the output directory")));
        }
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::internal(&format!("writing {}", path.display()), e))?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::internal(name, e))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(mut self, command: &str, seed: u64, seed_source: &'static str, inputs: Vec<InputEntry>) -> CliResult<()> {
        self.files.sort_by(|a, b| a.name.cmp(&b.name));
        let manifest = Manifest {
            command: command.to_string(),
            seed,
            seed_source,
            inputs,
            files: std::mem::take(&mut self.files),
        };
        let bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::internal(MANIFEST, e))?;
        let path = self.root.join(MANIFEST);
        std::fs::write(&path, bytes).map_err(|e| CliError::internal(&format!("writing {}", path.display()), e))
    }
}

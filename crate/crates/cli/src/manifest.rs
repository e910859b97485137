//! Run manifests and cleanup of partial outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub command: &'static str,
    pub argv: Vec<String>,
    /// Every setting after defaults were applied.
    pub config: serde_json::Value,
    pub seeds: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub wall_seconds: f64,
}

/// Tracks files a command creates. Unless [`commit`](Self::commit) runs,
/// dropping it deletes them.
pub struct Outputs {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Self {
            files: Vec::new(),
            dirs: Vec::new(),
            committed: false,
        }
    }

    pub fn file(&mut self, path: &Path) -> PathBuf {
        self.files.push(path.to_path_buf());
        path.to_path_buf()
    }

    /// Registers a directory for removal if this call creates it.
    pub fn dir(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            std::fs::create_dir_all(path).with_context(|| format!("cannot create {}", path.display()))?;
            self.dirs.push(path.to_path_buf());
        }
        Ok(())
    }

    pub fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        self.file(path);
        std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
    }

    /// Hashes the outputs and writes `<manifest_base>.manifest.json`.
    pub fn finish(
        mut self,
        manifest_base: &Path,
        command: &'static str,
        config: serde_json::Value,
        seeds: serde_json::Value,
        inputs: &[&Path],
        started: Instant,
    ) -> Result<()> {
        let mut files = self.files.clone();
        files.sort();
        let outputs = files
            .iter()
            .map(|p| Ok(FileRecord { path: p.clone(), sha256: sha256_file(p)? }))
            .collect::<Result<Vec<_>>>()?;
        let inputs = inputs
            .iter()
            .map(|p| Ok(FileRecord { path: p.to_path_buf(), sha256: sha256_file(p)? }))
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            argv: std::env::args().collect(),
            config,
            seeds,
            inputs,
            outputs,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        let mut name = manifest_base.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        self.write(&path, &text)?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = std::fs::remove_dir_all(d);
        }
    }
}

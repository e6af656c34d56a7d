//! The run directory and its manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const CONFIG_NAME: &str = "config.toml";

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub exit_status: i32,
    pub message: Option<String>,
    pub files: Vec<FileEntry>,
}

/// Output directory that remembers every file written to it.
pub struct RunDir {
    root: PathBuf,
    files: Vec<String>,
    started: u128,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

impl RunDir {
    /// Creates `root`, which must not exist or be empty.
    pub fn create(root: &Path) -> Result<Self> {
        if root.exists() {
            let mut entries = fs::read_dir(root).with_context(|| format!("cannot read {}", root.display()))?;
            if entries.next().is_some() {
                bail!("output directory {} is not empty", root.display());
            }
        } else {
            fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        }
        Ok(RunDir {
            root: root.to_path_buf(),
            files: Vec::new(),
            started: now_ms(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Registers `name` for the manifest; the caller writes it.
    pub fn register(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.path(name)
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.register(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
    }

    /// Writes the manifest listing every registered file with its checksum.
    pub fn finish(self, command: &str, seed: u64, config: &str, exit_status: i32, message: Option<String>) -> Result<()> {
        let mut files = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let path = self.root.join(name);
            let data = fs::read(&path).with_context(|| format!("cannot read {}", path.display()))?;
            files.push(FileEntry {
                name: name.clone(),
                bytes: data.len() as u64,
                sha256: format!("{:x}", Sha256::digest(&data)),
            });
        }
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: config.to_string(),
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
            exit_status,
            message,
            files,
        };
        let path = self.root.join(MANIFEST_NAME);
        let mut f = fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        serde_json::to_writer_pretty(&mut f, &manifest)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

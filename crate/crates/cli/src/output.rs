//! Artifact files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::FileConfig;

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub argv: Vec<String>,
    pub version: &'static str,
    pub root_seed: u64,
    pub seeds: Vec<u64>,
    /// Same content as `config.resolved.toml`.
    pub config: serde_json::Value,
    pub artifacts: Vec<Artifact>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

pub fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Collects the files written into one output directory.
pub struct OutDir {
    root: PathBuf,
    written: Vec<Artifact>,
    started: u128,
}

impl OutDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
            started: unix_ms(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes `name` through `fill`, then records its hash.
    pub fn write(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> anyhow::Result<()>,
    ) -> anyhow::Result<PathBuf> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        let path = self.path(name);
        let mut f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        f.write_all(&buf)?;
        self.written.push(Artifact {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(&buf)),
            bytes: buf.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        self.write(name, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value)?;
            buf.push(b'\n');
            Ok(())
        })
    }

    /// Writes the resolved config and `manifest.json`; call last.
    pub fn finish(
        mut self,
        command: &str,
        config: &FileConfig,
        seeds: Vec<u64>,
    ) -> anyhow::Result<PathBuf> {
        let toml = config.to_toml()?;
        self.write("config.resolved.toml", |buf| {
            buf.extend_from_slice(toml.as_bytes());
            Ok(())
        })?;
        let manifest = Manifest {
            command: command.to_string(),
            argv: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION"),
            root_seed: config.engine.seed.unwrap_or(0),
            seeds,
            config: serde_json::to_value(config)?,
            artifacts: std::mem::take(&mut self.written),
            started_unix_ms: self.started,
            finished_unix_ms: unix_ms(),
        };
        let path = self.path("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::io;

pub const LOCK_FILE: &str = ".lock";
pub const CONFIG_FILE: &str = "config.toml";

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Provenance record written next to a stage's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub config: serde_json::Value,
    /// Artifact name (or external path) to SHA-256 of the bytes read.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn manifest_name(stage: &str) -> String {
    format!("{stage}.manifest.json")
}

/// One stage execution: holds the lock and records what was read and written.
#[derive(Debug)]
pub struct StageRun<'a> {
    stage: &'static str,
    pub config: &'a PipelineConfig,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    _lock: OutputLock,
}

impl<'a> StageRun<'a> {
    pub fn begin(stage: &'static str, config: &'a PipelineConfig) -> Result<Self> {
        config.validate()?;
        let lock = OutputLock::acquire(&config.out)?;
        tracing::info!(stage, out = %config.out.display(), "stage started");
        Ok(Self {
            stage,
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            _lock: lock,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).exists()
    }

    /// Reads an artifact of the output directory.
    pub fn read(&mut self, name: &str) -> Result<Vec<u8>> {
        let bytes = io::read(&self.path(name))?;
        self.inputs.insert(name.to_string(), io::sha256_hex(&bytes));
        Ok(bytes)
    }

    /// Reads a file outside the output directory, keyed by its path as given.
    pub fn read_external(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = io::read(path)?;
        self.inputs.insert(path.display().to_string(), io::sha256_hex(&bytes));
        Ok(bytes)
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(&mut self, name: &str) -> Result<T> {
        let bytes = self.read(name)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Format {
            what: "JSON artifact",
            detail: format!("{name}: {e}"),
        })
    }

    pub fn read_jsonl<T: serde::de::DeserializeOwned>(&mut self, name: &str) -> Result<Vec<T>> {
        let bytes = self.read(name)?;
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::Format {
            what: "JSON lines file",
            detail: format!("{name}: {e}"),
        })?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, line)| {
                serde_json::from_str(line).map_err(|e| Error::Format {
                    what: "JSON lines file",
                    detail: format!("{name} line {}: {e}", i + 1),
                })
            })
            .collect()
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        io::atomic_write(&self.path(name), bytes)?;
        self.outputs.insert(name.to_string(), io::sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, &io::to_json_bytes(value)?)
    }

    pub fn write_jsonl<T: Serialize>(&mut self, name: &str, items: &[T]) -> Result<()> {
        self.write(name, &io::to_jsonl_bytes(items)?)
    }

    /// Writes the config and the manifest; the lock is released afterwards.
    pub fn finish(self) -> Result<Manifest> {
        io::atomic_write(&self.path(CONFIG_FILE), self.config.to_toml().as_bytes())?;
        let manifest = Manifest {
            stage: self.stage.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(self.config)?,
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
        };
        io::write_json(&self.path(&manifest_name(self.stage)), &manifest)?;
        tracing::info!(stage = self.stage, outputs = manifest.outputs.len(), "stage finished");
        Ok(manifest)
    }
}

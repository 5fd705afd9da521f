//! Per-invocation bookkeeping: input resolution, output writing and the
//! run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::LoadedConfig;
use crate::InputError;

pub struct Run {
    pub command: &'static str,
    base_dir: PathBuf,
    out_dir: PathBuf,
    config_sha256: String,
    /// Config-relative path as written, to resolved path.
    inputs: BTreeMap<String, PathBuf>,
    outputs: BTreeMap<String, String>,
    seeds: Vec<u64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_sha256: &'a str,
    seeds: &'a [u64],
    inputs: BTreeMap<&'a str, String>,
    outputs: &'a BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Run {
    /// `overrides` are the command-line values that changed the config; they
    /// are hashed together with the file bytes.
    pub fn new(command: &'static str, loaded: &LoadedConfig, out_dir: PathBuf, overrides: &str) -> Result<Self> {
        let mut hasher = Sha256::new();
        hasher.update(&loaded.raw);
        hasher.update(b"\n--\n");
        hasher.update(overrides.as_bytes());
        fs::create_dir_all(&out_dir)
            .map_err(|e| InputError(format!("cannot create output directory {}: {e}", out_dir.display())))?;
        Ok(Run {
            command,
            base_dir: loaded.base_dir.clone(),
            out_dir,
            config_sha256: hex::encode(hasher.finalize()),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            seeds: loaded.config.seeds.clone(),
        })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Resolves a required input, failing early when it does not exist.
    pub fn input(&mut self, path: &Path) -> Result<PathBuf> {
        let resolved = self.resolve(path);
        if !resolved.is_file() {
            return Err(InputError(format!("input file not found: {}", resolved.display())).into());
        }
        self.inputs.insert(path.display().to_string(), resolved.clone());
        Ok(resolved)
    }

    /// Like [`Run::input`] but a missing file is returned as `None`.
    pub fn optional_input(&mut self, path: &Path) -> Option<PathBuf> {
        self.input(path).ok()
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let bytes = bytes.as_ref();
        let path = self.out_path(name);
        fs::write(&path, bytes).map_err(|e| InputError(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).context("serializing report")?;
        text.push('\n');
        self.write(name, text)
    }

    /// Records a file written by a library routine.
    pub fn record_output(&mut self, name: &str) -> Result<()> {
        let path = self.out_path(name);
        let bytes = fs::read(&path).map_err(|e| InputError(format!("cannot read back {}: {e}", path.display())))?;
        self.outputs.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf> {
        let mut inputs = BTreeMap::new();
        for (name, path) in &self.inputs {
            let bytes = fs::read(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
            inputs.insert(name.as_str(), sha256_hex(&bytes));
        }
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config_sha256: &self.config_sha256,
            seeds: &self.seeds,
            inputs,
            outputs: &self.outputs,
        };
        let path = self.out_path(&format!("{}.manifest.json", self.command));
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| InputError(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

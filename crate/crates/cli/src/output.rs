use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mfoc::csv::{fmt_f64, CsvWriter};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Machine-readable account of one run. Everything except
/// `wall_clock_seconds` is reproducible from the inputs.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub tool_version: &'a str,
    pub seed: u64,
    pub config: &'a Value,
    pub wall_clock_seconds: f64,
    pub files: Vec<FileRecord>,
}

pub const MANIFEST: &str = "manifest.json";

/// Output directory that remembers what was written to it.
pub struct RunOutput {
    dir: PathBuf,
    files: Vec<FileRecord>,
    started: Instant,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

impl RunOutput {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::config("--out", format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileRecord {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// Builds a CSV in memory with `header` and hands the writer to `fill`.
    pub fn csv<S: AsRef<str>>(
        &mut self,
        name: &str,
        header: &[S],
        fill: impl FnOnce(&mut CsvWriter<Vec<u8>>) -> io::Result<()>,
    ) -> Result<(), CliError> {
        let mut w = CsvWriter::new(Vec::new(), header)?;
        fill(&mut w)?;
        self.write(name, &w.into_inner())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Invariant(e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Writes the manifest last; it lists every other file with its digest.
    pub fn finish(mut self, command: &str, seed: u64, config: &Value) -> Result<(), CliError> {
        self.files.sort_by(|a, b| a.name.cmp(&b.name));
        let manifest = RunManifest {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            files: std::mem::take(&mut self.files),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Invariant(e.to_string()))?;
        bytes.push(b'\n');
        fs::write(self.dir.join(MANIFEST), bytes)?;
        Ok(())
    }
}

/// `None` prints as an empty field.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

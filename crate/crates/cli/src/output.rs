//! Output directories and run manifests.
//!
//! Every command stages its files in a hidden sibling directory and renames
//! it into place only after everything has been written, so a failed run
//! never leaves partial output behind.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::{CmdResult, Failure};

pub const SCHEMA_VERSION: u32 = 1;

pub struct OutputDir {
    target: PathBuf,
    staging: PathBuf,
    files: Vec<FileEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
}

impl OutputDir {
    pub fn create(target: &Path) -> CmdResult<Self> {
        if target.exists() {
            return Err(Failure::input(anyhow!(
                "output directory {} already exists",
                target.display()
            )));
        }
        let name = target
            .file_name()
            .ok_or_else(|| Failure::input(anyhow!("invalid output path {}", target.display())))?;
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent)
            .with_context(|| format!("creating {}", parent.display()))
            .map_err(Failure::input)?;
        let staging = parent.join(format!(
            ".{}.partial-{}",
            name.to_string_lossy(),
            std::process::id()
        ));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging)?;
        Ok(Self {
            target: target.to_path_buf(),
            staging,
            files: Vec::new(),
        })
    }

    pub fn path(&self, relative: &str) -> PathBuf {
        self.staging.join(relative)
    }

    fn open(&mut self, relative: &str, columns: Option<Vec<String>>) -> CmdResult<BufWriter<fs::File>> {
        let path = self.path(relative);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        self.files.push(FileEntry {
            path: relative.to_string(),
            columns,
        });
        Ok(BufWriter::new(fs::File::create(path)?))
    }

    /// Opens a file for writing whose layout is not a CSV table.
    pub fn writer(&mut self, relative: &str) -> CmdResult<BufWriter<fs::File>> {
        self.open(relative, None)
    }

    /// Records a file that a library routine writes directly.
    pub fn record(&mut self, relative: &str, columns: &[&str]) {
        self.files.push(FileEntry {
            path: relative.to_string(),
            columns: Some(columns.iter().map(|c| c.to_string()).collect()),
        });
    }

    pub fn write_json<T: Serialize>(&mut self, relative: &str, value: &T) -> CmdResult<()> {
        let mut w = self.writer(relative)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Writes a CSV table with the given header and rows.
    pub fn write_csv<I, R>(&mut self, relative: &str, header: &[&str], rows: I) -> CmdResult<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let columns = header.iter().map(|c| c.to_string()).collect();
        let mut wtr = csv::Writer::from_writer(self.open(relative, Some(columns))?);
        wtr.write_record(header)?;
        for row in rows {
            wtr.write_record(row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes the manifest and moves the staged directory into place.
    pub fn finish(mut self, mut manifest: Manifest) -> CmdResult<PathBuf> {
        manifest.finished_unix = unix_now();
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        manifest.files = std::mem::take(&mut self.files);
        let file = fs::File::create(self.staging.join("manifest.json"))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        w.write_all(b"\n")?;
        w.flush()?;
        fs::rename(&self.staging, &self.target)
            .with_context(|| format!("moving output into {}", self.target.display()))
            .map_err(Failure::input)?;
        Ok(self.target.clone())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if self.staging.exists() {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub command_line: String,
    pub seed: u64,
    pub seed_source: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputRecord>,
    pub settings: serde_json::Value,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub files: Vec<FileEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

impl Manifest {
    pub fn new(command: &str, command_line: &str, seed: ResolvedSeed, settings: serde_json::Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            command_line: command_line.to_string(),
            seed: seed.value,
            seed_source: seed.source,
            input: None,
            settings,
            started_unix: unix_now(),
            finished_unix: 0.0,
            files: Vec::new(),
        }
    }

    pub fn with_input(mut self, path: &Path) -> CmdResult<Self> {
        self.input = Some(InputRecord {
            path: path.display().to_string(),
            sha256: file_digest(path)?,
        });
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ResolvedSeed {
    pub value: u64,
    pub source: &'static str,
}

pub fn resolve_seed(seed: Option<u64>) -> ResolvedSeed {
    match seed {
        Some(value) => ResolvedSeed { value, source: "user" },
        None => ResolvedSeed {
            value: rand::random(),
            source: "entropy",
        },
    }
}

pub fn file_digest(path: &Path) -> CmdResult<String> {
    let bytes = fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::input)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// File-name-safe version of a sample id.
pub fn safe_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

//! Run manifests: what was read, what was written, and what went wrong.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    /// The record produced no usable output.
    Fatal,
    /// The record was processed with a fallback.
    Soft,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub inputs: Vec<FileDigest>,
    pub config: Value,
    pub config_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taxonomy_digest: Option<String>,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<FileDigest>,
    pub records: usize,
    pub fatal_failures: usize,
    pub soft_failures: usize,
    pub failures: Vec<Failure>,
    pub summary: Value,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Result of a finished subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub records: usize,
    pub fatal: usize,
    pub soft: usize,
    pub summary: Value,
}

impl Outcome {
    pub fn success(&self) -> bool {
        self.fatal == 0
    }
}

/// Collects manifest fields while a subcommand runs.
#[derive(Debug)]
pub struct Run {
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    pub fn start<C: Serialize>(command: &str, out_dir: &Path, seed: u64, config: &C) -> Result<Self> {
        fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        let config = serde_json::to_value(config)?;
        let config_digest = sha256_hex(serde_json::to_string(&config)?.as_bytes());
        Ok(Run {
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                inputs: Vec::new(),
                config,
                config_digest,
                taxonomy_digest: None,
                seed,
                started_at: now(),
                finished_at: String::new(),
                outputs: Vec::new(),
                records: 0,
                fatal_failures: 0,
                soft_failures: 0,
                failures: Vec::new(),
                summary: Value::Null,
            },
        })
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.manifest.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn set_taxonomy_digest(&mut self, digest: String) {
        self.manifest.taxonomy_digest = Some(digest);
    }

    pub fn write_output(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(path)
    }

    pub fn fail(&mut self, id: &str, severity: Severity, message: impl Into<String>) {
        let message = message.into();
        match severity {
            Severity::Fatal => {
                log::error!("{id}: {message}");
                self.manifest.fatal_failures += 1;
            }
            Severity::Soft => {
                log::warn!("{id}: {message}");
                self.manifest.soft_failures += 1;
            }
        }
        self.manifest.failures.push(Failure {
            id: id.to_string(),
            severity,
            message,
        });
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn finish(mut self, records: usize, summary: Value) -> Result<Outcome> {
        self.manifest.records = records;
        self.manifest.summary = summary.clone();
        self.manifest.finished_at = now();
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        let path = self.out_dir.join(MANIFEST_FILE);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(Outcome {
            out_dir: self.out_dir,
            records,
            fatal: self.manifest.fatal_failures,
            soft: self.manifest.soft_failures,
            summary,
        })
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// One JSON value per line.
pub fn to_jsonl<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row)?);
        out.push('\n');
    }
    Ok(out)
}

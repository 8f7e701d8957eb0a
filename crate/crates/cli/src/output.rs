//! Output directory bookkeeping and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, ExperimentConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub config_digest: String,
    pub workers: usize,
    pub wall_time_seconds: f64,
    pub checks: Vec<CheckResult>,
    pub files: Vec<FileEntry>,
    pub pass: bool,
}

/// Scalar report shared by every estimator output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimator: String,
    pub parameters: serde_json::Value,
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
    pub wall_time_seconds: f64,
    pub config_digest: String,
    pub details: serde_json::Value,
}

/// Collects files and check outcomes for one run.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub dir: PathBuf,
    pub digest: String,
    pub files: Vec<PathBuf>,
    pub checks: Vec<CheckResult>,
}

impl Context {
    pub fn new(cfg: ExperimentConfig, dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let digest = cfg.digest();
        Ok(Context {
            cfg,
            dir,
            digest,
            files: vec![],
            checks: vec![],
        })
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(CheckResult {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
        }
        let mut f = fs::File::create(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        f.write_all(bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        self.files.push(p.clone());
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<PathBuf, CliError> {
        let mut s = serde_json::to_vec_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
        s.push(b'\n');
        self.write_bytes(name, &s)
    }

    /// CSV with a leading `#` line carrying the config digest.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let mut s = format!("# config_digest={}\n{}\n", self.digest, header.join(","));
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        self.write_bytes(name, s.as_bytes())
    }

    pub fn write_binary(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        self.write_bytes(name, bytes)
    }

    pub fn report(
        &mut self,
        name: &str,
        estimator: &str,
        parameters: serde_json::Value,
        est: (f64, f64, u64),
        wall: f64,
        details: serde_json::Value,
    ) -> Result<PathBuf, CliError> {
        let r = EstimatorReport {
            estimator: estimator.into(),
            parameters,
            mean: est.0,
            std_error: est.1,
            samples: est.2,
            wall_time_seconds: wall,
            config_digest: self.digest.clone(),
            details,
        };
        self.write_json(name, &r)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn file_entry(base: &Path, p: &Path) -> Result<FileEntry, CliError> {
    let bytes = fs::read(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    let rel = p.strip_prefix(base).unwrap_or(p);
    Ok(FileEntry {
        path: rel.to_string_lossy().into_owned(),
        bytes: bytes.len() as u64,
        sha256: hex(&Sha256::digest(&bytes)),
    })
}

pub fn format_f(x: f64) -> String {
    format!("{x:.17e}")
}

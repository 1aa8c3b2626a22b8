//! Experiment directories: `manifest.json` plus CSV files.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Scan table written by `optimize`.
pub const SCAN_HEADER: [&str; 9] = [
    "N",
    "C",
    "gamma_over_kappa",
    "P",
    "scaled_variance",
    "variance",
    "trace_loss",
    "restarts",
    "converged_restarts",
];
/// Fitted exponents written by `optimize`.
pub const SCALING_HEADER: [&str; 6] = ["C", "gamma_over_kappa", "P", "alpha", "points", "n_values"];
/// Per-step diagnostics written by `evaluate`.
pub const STEPS_HEADER: [&str; 7] = ["step", "phi", "delta", "trace", "purity", "mean_jz", "mean_jz2"];
/// Row results written by `regress`.
pub const REGRESSION_HEADER: [&str; 9] = [
    "table",
    "N",
    "C",
    "gamma_over_kappa",
    "target",
    "scaled_variance",
    "trace_loss",
    "divergent",
    "passed",
];
/// Husimi grid written by `qfunc`.
pub const QFUNC_HEADER: [&str; 3] = ["theta", "phi", "q"];

/// Hex SHA-256 of configuration bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Contents of `manifest.json`. Free of timestamps, so reruns with the same
/// configuration and seed give identical files.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: Option<String>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub status: String,
    pub error: Option<String>,
    pub files: Vec<String>,
    pub results: serde_json::Value,
}

/// Output directory of one command run. Files are recorded in the order
/// they are created; the manifest is written last, also on failure.
pub struct Run {
    dir: PathBuf,
    manifest: Manifest,
}

impl Run {
    pub fn create(dir: &Path, command: &str, config: Option<&[u8]>, seed: u64, threads: Option<usize>) -> CliResult<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::config(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                tool: "dickectl",
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                config_sha256: config.map(sha256_hex),
                seed,
                threads,
                status: "running".into(),
                error: None,
                files: Vec::new(),
                results: serde_json::Value::Null,
            },
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Opens a CSV file under the run directory and writes its header.
    pub fn csv(&mut self, name: &str, header: &[&str]) -> CliResult<csv::Writer<BufWriter<File>>> {
        let path = self.path_for(name)?;
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
        w.write_record(header)?;
        Ok(w)
    }

    /// Creates a file under the run directory and records it.
    pub fn file(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.path_for(name)?;
        Ok(BufWriter::new(File::create(&path)?))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let w = self.file(name)?;
        serde_json::to_writer_pretty(w, value)?;
        Ok(())
    }

    fn path_for(&mut self, name: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.manifest.files.push(name.to_string());
        Ok(path)
    }

    /// Writes the manifest with the command outcome.
    pub fn finish(mut self, results: serde_json::Value, outcome: &CliResult<()>) -> CliResult<()> {
        self.manifest.results = results;
        match outcome {
            Ok(()) => self.manifest.status = "ok".into(),
            Err(e) => {
                self.manifest.status = "failed".into();
                self.manifest.error = Some(e.to_string());
            }
        }
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(self.dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

/// Full-precision decimal text for CSV cells.
pub fn cell(x: f64) -> String {
    format!("{x:e}")
}

/// Least-squares exponent `alpha` of `v ~ N^-alpha`.
pub fn fit_scaling_exponent(n: &[usize], v: &[f64]) -> Option<f64> {
    if n.len() < 2 || n.len() != v.len() || v.iter().any(|x| !(*x > 0.0)) {
        return None;
    }
    let x: Vec<f64> = n.iter().map(|&k| (k as f64).ln()).collect();
    let y: Vec<f64> = v.iter().map(|k| k.ln()).collect();
    let m = x.len() as f64;
    let (xm, ym) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxx: f64 = x.iter().map(|a| (a - xm).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    Some(-sxy / sxx)
}

//! CSV tables and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::{CliError, Result};

/// One CSV file. Tables flagged `timing` hold wall-clock values and are the
/// only outputs that differ between identical runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub timing: bool,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            timing: false,
        }
    }

    pub fn timing(mut self) -> Self {
        self.timing = true;
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    /// Values of column `header`.
    pub fn column(&self, header: &str) -> Option<Vec<&str>> {
        let i = self.headers.iter().position(|h| h == header)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

/// 17 significant digits in scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn int(x: usize) -> String {
    x.to_string()
}

pub fn text(s: &str) -> String {
    s.to_string()
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub schema_version: u32,
    pub experiment: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub n_paths: usize,
    pub threads: Option<usize>,
    pub parallel: bool,
    pub files: Vec<String>,
    pub timing_files: Vec<String>,
    pub notes: Vec<String>,
    pub config: ExperimentConfig,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_table(dir: &Path, table: &Table) -> Result<PathBuf> {
    let path = dir.join(table.file_name());
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(&table.headers)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// Writes every table and `manifest.json` into `dir`.
pub fn write_outputs(dir: &Path, tables: &[Table], manifest: &Manifest) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths = Vec::with_capacity(tables.len() + 1);
    for t in tables {
        paths.push(write_table(dir, t)?);
    }
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(manifest)?;
    fs::write(&path, body + "\n").map_err(|e| CliError::io(&path, e))?;
    paths.push(path);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(num(0.0), "0.0000000000000000e0");
    }

    #[test]
    fn column_lookup() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![int(1), text("q")]);
        assert_eq!(t.column("b").unwrap(), vec!["q"]);
        assert!(t.column("c").is_none());
        assert_eq!(t.file_name(), "x.csv");
    }
}

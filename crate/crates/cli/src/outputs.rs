//! Deterministic artifact writing with content hashing for the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use geolift_core::distance::DistanceMatrix;
use geolift_core::ingestion::fmt_float17;
use geolift_core::points::PointCloud;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Collects artifacts written to the output directory and their SHA-256
/// digests, in write order, for `run.json`.
pub struct ArtifactWriter {
    dir: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            hashes: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        let digest = Sha256::digest(bytes);
        self.hashes
            .insert(name.to_string(), format!("sha256:{}", hex(&digest)));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Usage(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_point_cloud(&mut self, name: &str, cloud: &PointCloud) -> Result<(), CliError> {
        let mut text = String::new();
        for row in cloud.rows() {
            let cells: Vec<String> = row.iter().map(|&v| fmt_float17(v)).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_distance_matrix(
        &mut self,
        name: &str,
        d: &DistanceMatrix,
    ) -> Result<(), CliError> {
        let n = d.n();
        let mut text = String::new();
        for i in 0..n {
            let cells: Vec<String> = (0..n).map(|j| fmt_float17(d.get(i, j))).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_scalar_column(&mut self, name: &str, values: &[f64]) -> Result<(), CliError> {
        let mut text = String::new();
        for &v in values {
            text.push_str(&fmt_float17(v));
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_lines(&mut self, name: &str, lines: &[String]) -> Result<(), CliError> {
        let mut text = String::new();
        for l in lines {
            text.push_str(l);
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    pub fn manifest(&self) -> &BTreeMap<String, String> {
        &self.hashes
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads a numeric covariate column (0-based) from a CSV file.
pub fn load_covariate(path: &Path, column: usize) -> Result<Vec<f64>, CliError> {
    let rows = geolift_core::ingestion::read_numeric_csv(path).map_err(CliError::Core)?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let v = row.get(column).ok_or_else(|| {
            CliError::Usage(format!(
                "{}: row {} has no column {column}",
                path.display(),
                i + 1
            ))
        })?;
        out.push(*v);
    }
    Ok(out)
}

/// Reads one label per line.
pub fn load_labels(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r').to_string())
        .collect())
}

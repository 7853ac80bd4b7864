//! Loading real-world inputs: edge lists, dense matrix files and time-series
//! tables, plus the matching writers. Floats are serialized with 17
//! significant digits so save/load round-trips are bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{MatrixKind, SimilarityMatrix};
use crate::points::PointCloud;

/// 17-significant-digit float formatting; round-trips any f64 exactly.
pub fn fmt_float17(v: f64) -> String {
    format!("{v:.16e}")
}

/// How to reconcile edges listed in both orientations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectedPolicy {
    /// Error when an edge appears in both orientations.
    SymmetrizeError,
    /// Keep an edge if either orientation is listed.
    SymmetrizeUnion,
}

/// What an edge-list load dropped or collapsed.
#[derive(Debug, Clone, Default, Serialize)]
pub struct EdgeListReport {
    pub self_loops_dropped: usize,
    pub duplicate_edges_collapsed: usize,
}

/// Parses a TSV edge list (`src<TAB>dst[<TAB>weight]`, `#` comments skipped)
/// into a binary adjacency matrix. Vertices are indexed by first appearance;
/// duplicate edges collapse; self-loops are dropped and counted. Weights are
/// parsed and validated but the matrix is binary: an edge exists if listed at
/// all.
pub fn load_edge_list(
    path: &Path,
    policy: DirectedPolicy,
) -> Result<(SimilarityMatrix, Vec<String>, EdgeListReport)> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut labels: Vec<String> = Vec::new();
    let mut index_of = std::collections::HashMap::new();
    let mut report = EdgeListReport::default();
    let mut seen = std::collections::HashSet::new();
    let mut edges: Vec<(u32, u32)> = Vec::new();

    let intern = |name: &str, labels: &mut Vec<String>, index_of: &mut std::collections::HashMap<String, u32>| -> u32 {
        if let Some(&i) = index_of.get(name) {
            return i;
        }
        let i = labels.len() as u32;
        labels.push(name.to_string());
        index_of.insert(name.to_string(), i);
        i
    };

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split('\t');
        let src = fields.next().filter(|s| !s.is_empty());
        let dst = fields.next().filter(|s| !s.is_empty());
        let (src, dst) = match (src, dst) {
            (Some(s), Some(d)) => (s, d),
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected `src<TAB>dst[<TAB>weight]`, got {trimmed:?}"),
                })
            }
        };
        if let Some(w) = fields.next() {
            let parsed: f64 = w.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("cannot parse weight {w:?}"),
            })?;
            if !parsed.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("non-finite weight {parsed}"),
                });
            }
        }
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: lineno,
                message: "too many fields".into(),
            });
        }
        let i = intern(src, &mut labels, &mut index_of);
        let j = intern(dst, &mut labels, &mut index_of);
        if i == j {
            report.self_loops_dropped += 1;
            continue;
        }
        if seen.contains(&(i, j)) {
            report.duplicate_edges_collapsed += 1;
            continue;
        }
        if seen.contains(&(j, i)) {
            match policy {
                DirectedPolicy::SymmetrizeError => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!(
                            "edge between {src:?} and {dst:?} listed in both orientations"
                        ),
                    })
                }
                DirectedPolicy::SymmetrizeUnion => {
                    report.duplicate_edges_collapsed += 1;
                    continue;
                }
            }
        }
        seen.insert((i, j));
        edges.push((i, j));
    }
    let n = labels.len();
    let entries: Vec<(u32, u32, f64)> = edges
        .into_iter()
        .map(|(i, j)| if i < j { (i, j, 1.0) } else { (j, i, 1.0) })
        .collect();
    let matrix = SimilarityMatrix::sparse_upper(n, entries, MatrixKind::Adjacency)?;
    Ok((matrix, labels, report))
}

/// Loads an edge list whose labels are vertex indices `0..n`, so isolated
/// vertices survive. Used for artifacts whose vertex count is pinned
/// elsewhere (e.g. a simulation manifest).
pub fn load_edge_list_indexed(path: &Path, n: usize) -> Result<SimilarityMatrix> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut entries: Vec<(u32, u32, f64)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split('\t');
        let parse = |s: Option<&str>| -> Result<usize> {
            s.and_then(|x| x.parse::<usize>().ok())
                .filter(|&v| v < n)
                .ok_or_else(|| Error::Parse {
                    line: lineno,
                    message: format!("expected vertex indices below {n}, got {trimmed:?}"),
                })
        };
        let i = parse(fields.next())?;
        let j = parse(fields.next())?;
        if i == j {
            continue;
        }
        let (a, b) = if i < j { (i as u32, j as u32) } else { (j as u32, i as u32) };
        if seen.insert((a, b)) {
            entries.push((a, b, 1.0));
        }
    }
    SimilarityMatrix::sparse_upper(n, entries, MatrixKind::Adjacency)
}

/// Writes the strict-upper-triangle edges of an adjacency matrix as an
/// index-labelled TSV, one `i<TAB>j` line per edge. Weighted (generic)
/// matrices include the weight as a third column.
pub fn save_edge_list(m: &SimilarityMatrix, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (i, j, v) in m.upper_entries() {
        if i == j || v == 0.0 {
            continue;
        }
        match m.kind() {
            MatrixKind::Adjacency => writeln!(out, "{i}\t{j}")?,
            _ => writeln!(out, "{i}\t{j}\t{}", fmt_float17(v))?,
        }
    }
    out.flush()?;
    Ok(())
}

fn classify_dense(n: usize, values: &[f64]) -> MatrixKind {
    let adjacency = (0..n).all(|i| {
        (0..n).all(|j| {
            let v = values[i * n + j];
            if i == j {
                v == 0.0
            } else {
                v == 0.0 || v == 1.0
            }
        })
    });
    if adjacency && n > 0 {
        return MatrixKind::Adjacency;
    }
    let correlation = (0..n).all(|i| {
        (0..n).all(|j| {
            let v = values[i * n + j];
            if i == j {
                v == 1.0
            } else {
                (-1.0..=1.0).contains(&v)
            }
        })
    });
    if correlation && n > 0 {
        return MatrixKind::Correlation;
    }
    MatrixKind::Generic
}

/// Reads a numeric CSV into rows; an optional first header row of labels is
/// skipped (detected by parse failure).
pub fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        let mut row = Vec::with_capacity(record.len());
        let mut ok = true;
        for field in record.iter() {
            match field.trim().parse::<f64>() {
                Ok(v) => row.push(v),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            if idx == 0 {
                continue; // header row of labels
            }
            return Err(Error::Parse {
                line: idx + 1,
                message: "non-numeric value".into(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Loads a dense symmetric matrix from CSV. Asymmetric input (beyond 1e-9) is
/// an error, never silently averaged; the kind is inferred from the entries.
pub fn load_dense_matrix(path: &Path) -> Result<SimilarityMatrix> {
    let rows = read_numeric_csv(path)?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::Validation(format!(
            "{} contains no numeric rows",
            path.display()
        )));
    }
    let mut values = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Validation(format!(
                "matrix is not square: row {} has {} columns, expected {n}",
                i + 1,
                row.len()
            )));
        }
        values.extend_from_slice(row);
    }
    let kind = classify_dense(n, &values);
    SimilarityMatrix::dense_with_tolerance(n, values, kind, 1e-9)
}

/// Writes a dense matrix as CSV with 17-significant-digit floats.
pub fn save_dense_matrix(m: &SimilarityMatrix, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let n = m.n();
    let dense = m.to_dense();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| fmt_float17(dense[i * n + j])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Loads a point cloud from a headerless numeric CSV (rows = points).
pub fn load_point_cloud(path: &Path) -> Result<PointCloud> {
    let rows = read_numeric_csv(path)?;
    if rows.is_empty() {
        return Err(Error::Validation(format!(
            "{} contains no numeric rows",
            path.display()
        )));
    }
    PointCloud::from_rows(&rows)
}

pub fn save_point_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in cloud.rows() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_float17(v)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Entity-by-timestamp observations with missing values (NaN internally).
#[derive(Debug, Clone)]
pub struct TimeSeriesTable {
    pub entities: Vec<String>,
    pub timestamps: Vec<String>,
    /// Row-major n x T; missing observations are NaN.
    values: Vec<f64>,
}

impl TimeSeriesTable {
    pub fn new(entities: Vec<String>, timestamps: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != entities.len() * timestamps.len() {
            return Err(Error::Dimension(format!(
                "expected {} values, got {}",
                entities.len() * timestamps.len(),
                values.len()
            )));
        }
        Ok(TimeSeriesTable {
            entities,
            timestamps,
            values,
        })
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_timestamps(&self) -> usize {
        self.timestamps.len()
    }

    pub fn value(&self, entity: usize, t: usize) -> f64 {
        self.values[entity * self.timestamps.len() + t]
    }

    pub fn is_missing(&self, entity: usize, t: usize) -> bool {
        self.value(entity, t).is_nan()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    fn restrict(&self, keep_entities: &[usize], keep_timestamps: &[usize]) -> TimeSeriesTable {
        let mut values = Vec::with_capacity(keep_entities.len() * keep_timestamps.len());
        for &e in keep_entities {
            for &t in keep_timestamps {
                values.push(self.value(e, t));
            }
        }
        TimeSeriesTable {
            entities: keep_entities.iter().map(|&e| self.entities[e].clone()).collect(),
            timestamps: keep_timestamps
                .iter()
                .map(|&t| self.timestamps[t].clone())
                .collect(),
            values,
        }
    }
}

/// Loads a time-series CSV: first row = timestamp labels (corner cell
/// ignored), first column = entity labels, empty cells = missing.
pub fn load_time_series(path: &Path) -> Result<TimeSeriesTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Validation("empty time-series file".into()))?
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
    let timestamps: Vec<String> = header.iter().skip(1).map(|s| s.to_string()).collect();
    if timestamps.is_empty() {
        return Err(Error::Validation("no timestamp columns".into()));
    }
    let mut entities = Vec::new();
    let mut values = Vec::new();
    for (idx, record) in records.enumerate() {
        let lineno = idx + 2;
        let record = record.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let mut fields = record.iter();
        let name = fields
            .next()
            .ok_or_else(|| Error::Parse {
                line: lineno,
                message: "missing entity label".into(),
            })?
            .to_string();
        if record.len() != timestamps.len() + 1 {
            return Err(Error::Parse {
                line: lineno,
                message: format!(
                    "expected {} value cells, got {}",
                    timestamps.len(),
                    record.len() - 1
                ),
            });
        }
        for field in fields {
            let trimmed = field.trim();
            if trimmed.is_empty() {
                values.push(f64::NAN);
            } else {
                let v: f64 = trimmed.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("cannot parse value {trimmed:?}"),
                })?;
                values.push(v);
            }
        }
        entities.push(name);
    }
    if entities.len() < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 entities, got {}",
            entities.len()
        )));
    }
    TimeSeriesTable::new(entities, timestamps, values)
}

/// What [`drop_incomplete`] removed.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DropReport {
    pub entities_dropped: Vec<String>,
    pub timestamps_dropped: Vec<String>,
}

/// Iteratively removes the entity or timestamp with the highest missing
/// fraction until no missing values remain. Cross-side ties prefer the
/// entity; within a side, the lowest index wins.
pub fn drop_incomplete(t: &TimeSeriesTable) -> Result<(TimeSeriesTable, DropReport)> {
    let mut entities: Vec<usize> = (0..t.n_entities()).collect();
    let mut timestamps: Vec<usize> = (0..t.n_timestamps()).collect();
    let mut report = DropReport::default();
    loop {
        if entities.is_empty() || timestamps.is_empty() {
            return Err(Error::Data(
                "removing incomplete rows and columns emptied the table".into(),
            ));
        }
        let mut worst_entity = (0usize, 0usize); // (missing, position)
        for (pos, &e) in entities.iter().enumerate() {
            let missing = timestamps.iter().filter(|&&ts| t.is_missing(e, ts)).count();
            if missing > worst_entity.0 {
                worst_entity = (missing, pos);
            }
        }
        let mut worst_ts = (0usize, 0usize);
        for (pos, &ts) in timestamps.iter().enumerate() {
            let missing = entities.iter().filter(|&&e| t.is_missing(e, ts)).count();
            if missing > worst_ts.0 {
                worst_ts = (missing, pos);
            }
        }
        if worst_entity.0 == 0 && worst_ts.0 == 0 {
            break;
        }
        let entity_fraction = worst_entity.0 as f64 / timestamps.len() as f64;
        let ts_fraction = worst_ts.0 as f64 / entities.len() as f64;
        if entity_fraction >= ts_fraction {
            let e = entities.remove(worst_entity.1);
            report.entities_dropped.push(t.entities[e].clone());
        } else {
            let ts = timestamps.remove(worst_ts.1);
            report.timestamps_dropped.push(t.timestamps[ts].clone());
        }
    }
    Ok((t.restrict(&entities, &timestamps), report))
}

/// Pearson correlation matrix of the entity rows over common timestamps.
/// The table must be complete (run [`drop_incomplete`] first); the diagonal
/// is exactly 1 and entries are clamped to [-1, 1] against rounding.
pub fn correlation_matrix(t: &TimeSeriesTable) -> Result<SimilarityMatrix> {
    if t.missing_count() > 0 {
        return Err(Error::Validation(
            "table has missing values; run drop_incomplete first".into(),
        ));
    }
    let n = t.n_entities();
    let m = t.n_timestamps();
    if n < 2 {
        return Err(Error::Validation("need at least 2 entities".into()));
    }
    if m < 2 {
        return Err(Error::Validation("need at least 2 common timestamps".into()));
    }
    // Standardize rows once.
    let mut standardized = vec![0.0; n * m];
    for e in 0..n {
        let row: Vec<f64> = (0..m).map(|ts| t.value(e, ts)).collect();
        let mean = row.iter().sum::<f64>() / m as f64;
        let var: f64 = row.iter().map(|v| (v - mean) * (v - mean)).sum();
        if var == 0.0 {
            return Err(Error::Data(format!(
                "entity {:?} has zero variance",
                t.entities[e]
            )));
        }
        let scale = var.sqrt();
        for ts in 0..m {
            standardized[e * m + ts] = (row[ts] - mean) / scale;
        }
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let r: f64 = (0..m)
                .map(|ts| standardized[i * m + ts] * standardized[j * m + ts])
                .sum();
            let r = r.clamp(-1.0, 1.0);
            values[i * n + j] = r;
            values[j * n + i] = r;
        }
    }
    SimilarityMatrix::dense(n, values, MatrixKind::Correlation)
}

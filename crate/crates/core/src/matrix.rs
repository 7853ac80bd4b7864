//! Symmetric similarity matrices: adjacency, correlation or generic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the entries of a [`SimilarityMatrix`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    /// Binary, zero diagonal.
    Adjacency,
    /// Entries in [-1, 1], unit diagonal.
    Correlation,
    /// Any symmetric real matrix.
    Generic,
}

#[derive(Debug, Clone)]
enum Storage {
    /// Row-major n*n values; the upper triangle is canonical and mirrored.
    Dense(Vec<f64>),
    /// Strict or non-strict upper triangle entries (i <= j), sorted by (i, j).
    /// Reads mirror across the diagonal; absent entries are zero.
    SparseUpper(Vec<(u32, u32, f64)>),
}

/// A symmetric n x n real matrix, dense or sparse.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    n: usize,
    storage: Storage,
    kind: MatrixKind,
}

fn check_kind_entry(kind: MatrixKind, i: usize, j: usize, v: f64) -> Result<()> {
    match kind {
        MatrixKind::Adjacency => {
            if v != 0.0 && v != 1.0 {
                return Err(Error::Validation(format!(
                    "adjacency entry ({i}, {j}) = {v} is not 0 or 1"
                )));
            }
            if i == j && v != 0.0 {
                return Err(Error::Validation(format!(
                    "adjacency diagonal entry ({i}, {i}) = {v} must be 0"
                )));
            }
        }
        MatrixKind::Correlation => {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "correlation entry ({i}, {j}) = {v} outside [-1, 1]"
                )));
            }
            if i == j && v != 1.0 {
                return Err(Error::Validation(format!(
                    "correlation diagonal entry ({i}, {i}) = {v} must be 1"
                )));
            }
        }
        MatrixKind::Generic => {}
    }
    Ok(())
}

impl SimilarityMatrix {
    /// Builds a dense matrix from row-major values, requiring exact symmetry.
    pub fn dense(n: usize, values: Vec<f64>, kind: MatrixKind) -> Result<Self> {
        Self::dense_with_tolerance(n, values, kind, 0.0)
    }

    /// Builds a dense matrix, accepting asymmetry up to `tol` in absolute
    /// value. The upper triangle is canonical: accepted lower-triangle values
    /// are overwritten by their mirror so the stored matrix is exactly
    /// symmetric.
    pub fn dense_with_tolerance(
        n: usize,
        mut values: Vec<f64>,
        kind: MatrixKind,
        tol: f64,
    ) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} values for a {n}x{n} matrix, got {}",
                n * n,
                values.len()
            )));
        }
        for (idx, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite entry {v} at ({}, {})",
                    idx / n,
                    idx % n
                )));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let a = values[i * n + j];
                let b = values[j * n + i];
                if (a - b).abs() > tol {
                    return Err(Error::Validation(format!(
                        "asymmetric entries: ({i}, {j}) = {a} but ({j}, {i}) = {b}"
                    )));
                }
                values[j * n + i] = a;
            }
        }
        for i in 0..n {
            for j in i..n {
                check_kind_entry(kind, i, j, values[i * n + j])?;
            }
        }
        Ok(SimilarityMatrix {
            n,
            storage: Storage::Dense(values),
            kind,
        })
    }

    /// Builds a sparse matrix from upper-triangle entries `(i, j, v)` with
    /// `i <= j`. Entries must be unique; unlisted pairs are zero.
    pub fn sparse_upper(
        n: usize,
        mut entries: Vec<(u32, u32, f64)>,
        kind: MatrixKind,
    ) -> Result<Self> {
        for &(i, j, v) in &entries {
            let (i, j) = (i as usize, j as usize);
            if i > j || j >= n {
                return Err(Error::Dimension(format!(
                    "sparse entry ({i}, {j}) outside upper triangle of a {n}x{n} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite entry {v} at ({i}, {j})"
                )));
            }
            check_kind_entry(kind, i, j, v)?;
        }
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        if entries.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Validation(
                "duplicate sparse entries for the same (i, j)".into(),
            ));
        }
        Ok(SimilarityMatrix {
            n,
            storage: Storage::SparseUpper(entries),
            kind,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::SparseUpper(_))
    }

    /// Entry (i, j); sparse reads mirror the stored upper triangle.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "index out of bounds");
        match &self.storage {
            Storage::Dense(v) => v[i * self.n + j],
            Storage::SparseUpper(entries) => {
                let (a, b) = if i <= j { (i as u32, j as u32) } else { (j as u32, i as u32) };
                match entries.binary_search_by_key(&(a, b), |&(x, y, _)| (x, y)) {
                    Ok(pos) => entries[pos].2,
                    Err(_) => 0.0,
                }
            }
        }
    }

    /// Number of stored upper-triangle entries (dense: n(n+1)/2).
    pub fn stored_upper_len(&self) -> usize {
        match &self.storage {
            Storage::Dense(_) => self.n * (self.n + 1) / 2,
            Storage::SparseUpper(e) => e.len(),
        }
    }

    /// Upper-triangle entries (i <= j) with nonzero values for sparse storage,
    /// all entries for dense storage.
    pub fn upper_entries(&self) -> Vec<(usize, usize, f64)> {
        match &self.storage {
            Storage::Dense(v) => {
                let mut out = Vec::with_capacity(self.n * (self.n + 1) / 2);
                for i in 0..self.n {
                    for j in i..self.n {
                        out.push((i, j, v[i * self.n + j]));
                    }
                }
                out
            }
            Storage::SparseUpper(e) => e
                .iter()
                .map(|&(i, j, v)| (i as usize, j as usize, v))
                .collect(),
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(v) => v.clone(),
            Storage::SparseUpper(entries) => {
                let mut out = vec![0.0; self.n * self.n];
                for &(i, j, v) in entries {
                    let (i, j) = (i as usize, j as usize);
                    out[i * self.n + j] = v;
                    out[j * self.n + i] = v;
                }
                out
            }
        }
    }

    /// y = A x. Deterministic regardless of storage.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        match &self.storage {
            Storage::Dense(v) => {
                for i in 0..self.n {
                    let row = &v[i * self.n..(i + 1) * self.n];
                    y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
            Storage::SparseUpper(entries) => {
                y.fill(0.0);
                for &(i, j, v) in entries {
                    let (i, j) = (i as usize, j as usize);
                    y[i] += v * x[j];
                    if i != j {
                        y[j] += v * x[i];
                    }
                }
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        match &self.storage {
            Storage::Dense(v) => v.iter().map(|a| a * a).sum::<f64>().sqrt(),
            Storage::SparseUpper(entries) => {
                let mut s = 0.0;
                for &(i, j, v) in entries {
                    s += if i == j { v * v } else { 2.0 * v * v };
                }
                s.sqrt()
            }
        }
    }

    /// Checks all entries are finite (always true post-construction; kept as a
    /// cheap guard for solvers).
    pub(crate) fn all_finite(&self) -> bool {
        match &self.storage {
            Storage::Dense(v) => v.iter().all(|a| a.is_finite()),
            Storage::SparseUpper(e) => e.iter().all(|&(_, _, v)| v.is_finite()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_rejects_asymmetry() {
        let err = SimilarityMatrix::dense(2, vec![0.0, 1.0, 0.5, 0.0], MatrixKind::Generic);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn dense_tolerance_canonicalises_upper() {
        let m = SimilarityMatrix::dense_with_tolerance(
            2,
            vec![0.0, 1.0, 1.0 + 1e-12, 0.0],
            MatrixKind::Generic,
            1e-9,
        )
        .unwrap();
        assert_eq!(m.get(1, 0), 1.0);
    }

    #[test]
    fn adjacency_invariants_enforced() {
        assert!(SimilarityMatrix::dense(2, vec![0.0, 0.5, 0.5, 0.0], MatrixKind::Adjacency).is_err());
        assert!(SimilarityMatrix::dense(1, vec![1.0], MatrixKind::Adjacency).is_err());
        assert!(SimilarityMatrix::dense(2, vec![0.0, 1.0, 1.0, 0.0], MatrixKind::Adjacency).is_ok());
    }

    #[test]
    fn correlation_invariants_enforced() {
        assert!(SimilarityMatrix::dense(1, vec![0.9], MatrixKind::Correlation).is_err());
        assert!(SimilarityMatrix::dense(2, vec![1.0, 1.5, 1.5, 1.0], MatrixKind::Correlation).is_err());
        assert!(SimilarityMatrix::dense(2, vec![1.0, -0.3, -0.3, 1.0], MatrixKind::Correlation).is_ok());
    }

    #[test]
    fn sparse_reads_mirror() {
        let m = SimilarityMatrix::sparse_upper(3, vec![(0, 1, 1.0)], MatrixKind::Adjacency).unwrap();
        assert_eq!(m.get(1, 0), 1.0);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(2, 0), 0.0);
        assert_eq!(m.get(2, 2), 0.0);
    }

    #[test]
    fn sparse_rejects_duplicates_and_lower() {
        assert!(
            SimilarityMatrix::sparse_upper(3, vec![(0, 1, 1.0), (0, 1, 1.0)], MatrixKind::Adjacency)
                .is_err()
        );
        assert!(SimilarityMatrix::sparse_upper(3, vec![(1, 0, 1.0)], MatrixKind::Adjacency).is_err());
    }

    #[test]
    fn matvec_matches_dense() {
        let m = SimilarityMatrix::sparse_upper(
            3,
            vec![(0, 1, 2.0), (1, 2, 3.0), (2, 2, 4.0)],
            MatrixKind::Generic,
        )
        .unwrap();
        let x = [1.0, -1.0, 0.5];
        let mut y = [0.0; 3];
        m.matvec(&x, &mut y);
        assert_eq!(y, [-2.0, 3.5, -1.0]);
    }

    #[test]
    fn non_finite_rejected() {
        let err = SimilarityMatrix::dense(1, vec![f64::NAN], MatrixKind::Generic);
        assert!(matches!(err, Err(Error::Validation(_))));
    }
}

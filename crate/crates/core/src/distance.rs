//! Symmetric nonnegative distance matrices with an explicit infinity
//! sentinel for disconnected pairs.

use crate::error::{Error, Result};
use crate::points::PointCloud;

/// An n x n distance matrix: zero diagonal, symmetric, entries >= 0.
/// `f64::INFINITY` marks pairs with no connecting path; it is never
/// approximated by a large finite value.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {n}x{n} distance matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::Validation(format!(
                    "nonzero diagonal entry at ({i}, {i})"
                )));
            }
            for j in (i + 1)..n {
                let a = entries[i * n + j];
                let b = entries[j * n + i];
                if a.is_nan() || b.is_nan() {
                    return Err(Error::Validation(format!("NaN distance at ({i}, {j})")));
                }
                if a != b {
                    return Err(Error::Validation(format!(
                        "asymmetric distances: ({i}, {j}) = {a} but ({j}, {i}) = {b}"
                    )));
                }
                if a < 0.0 {
                    return Err(Error::Validation(format!(
                        "negative distance {a} at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { n, entries })
    }

    /// Pairwise Euclidean distances of a point cloud.
    pub fn euclidean(cloud: &PointCloud) -> Self {
        let n = cloud.n();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = cloud.distance(i, j);
                entries[i * n + j] = d;
                entries[j * n + i] = d;
            }
        }
        DistanceMatrix { n, entries }
    }

    /// Unchecked construction for internal use: caller guarantees symmetry,
    /// zero diagonal and nonnegativity.
    pub(crate) fn from_parts_unchecked(n: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), n * n);
        DistanceMatrix { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// First infinite entry, if any.
    pub fn first_infinite(&self) -> Option<(usize, usize)> {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.entries[i * self.n + j].is_infinite() {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Strict upper-triangle entries in row-major order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                out.push(self.entries[i * self.n + j]);
            }
        }
        out
    }

    /// The submatrix on `indices` (in order).
    pub fn submatrix(&self, indices: &[usize]) -> DistanceMatrix {
        let m = indices.len();
        let mut entries = vec![0.0; m * m];
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate() {
                entries[a * m + b] = self.get(i, j);
            }
        }
        DistanceMatrix { n: m, entries }
    }
}

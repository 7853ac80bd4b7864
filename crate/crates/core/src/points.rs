//! Point clouds: n points in an ambient dimension.

use crate::error::{Error, Result};

/// An n x dim matrix of coordinates, one point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    n: usize,
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    /// Row-major coordinates; all entries must be finite, `dim >= 1`.
    pub fn new(n: usize, dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("point dimension must be >= 1".into()));
        }
        if coords.len() != n * dim {
            return Err(Error::Dimension(format!(
                "expected {} coordinates for {n} points in dimension {dim}, got {}",
                n * dim,
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite coordinate at point {}, component {}",
                bad / dim,
                bad % dim
            )));
        }
        Ok(PointCloud { n, dim, coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(1);
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Dimension(format!(
                    "row {i} has {} components, expected {dim}",
                    r.len()
                )));
            }
            coords.extend_from_slice(r);
        }
        PointCloud::new(rows.len(), dim, coords)
    }

    /// Points on a line (dimension 1).
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        PointCloud::new(values.len(), 1, values.to_vec())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Euclidean distance between points i and j.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row(i), self.row(j));
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// The cloud restricted to `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> PointCloud {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.row(i));
        }
        PointCloud {
            n: indices.len(),
            dim: self.dim,
            coords,
        }
    }

    /// Mean of each coordinate.
    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.dim];
        for r in self.rows() {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        if self.n > 0 {
            for m in &mut means {
                *m /= self.n as f64;
            }
        }
        means
    }
}

//! Spectral embedding, rank selection and degree correction.

use serde::{Deserialize, Serialize};

use crate::eigen::{symmetric_eigs_with, EigenPairs, EigsOptions};
use crate::error::{Error, Result};
use crate::matrix::SimilarityMatrix;
use crate::points::PointCloud;

/// Either an explicit dimension or automatic selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankChoice {
    Auto,
    Fixed(usize),
}

impl Serialize for RankChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RankChoice::Auto => s.serialize_str("auto"),
            RankChoice::Fixed(p) => s.serialize_u64(*p as u64),
        }
    }
}

impl<'de> Deserialize<'de> for RankChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = RankChoice;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                write!(f, "\"auto\" or a positive integer")
            }

            fn visit_str<E: serde::de::Error>(self, s: &str) -> std::result::Result<RankChoice, E> {
                if s == "auto" {
                    Ok(RankChoice::Auto)
                } else {
                    Err(E::custom("expected \"auto\" or a positive integer"))
                }
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<RankChoice, E> {
                if v >= 1 {
                    Ok(RankChoice::Fixed(v as usize))
                } else {
                    Err(E::custom("dimension must be a positive integer"))
                }
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<RankChoice, E> {
                if v >= 1 {
                    Ok(RankChoice::Fixed(v as usize))
                } else {
                    Err(E::custom("dimension must be a positive integer"))
                }
            }
        }
        d.deserialize_any(Visitor)
    }
}

/// Configuration of the spectral-embedding stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    /// Target embedding dimension, or automatic profile-likelihood selection.
    pub p: RankChoice,
    /// Project embedding rows to the unit sphere, dropping zero rows.
    #[serde(default)]
    pub degree_correct: bool,
    /// Number of eigenpairs computed (and candidate split points) when
    /// `p = auto`.
    #[serde(default = "default_max_p")]
    pub max_p: usize,
}

fn default_max_p() -> usize {
    30
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            p: RankChoice::Auto,
            degree_correct: false,
            max_p: default_max_p(),
        }
    }
}

/// Embedding rows from computed eigenpairs: row i of the eigenvector block
/// scaled by |lambda_k|^(1/2) per column.
pub fn embed_from_eigs(pairs: &EigenPairs) -> PointCloud {
    let n = pairs.n();
    let p = pairs.p();
    let scales: Vec<f64> = pairs.values.iter().map(|l| l.abs().sqrt()).collect();
    let mut coords = vec![0.0; n * p];
    for k in 0..p {
        let v = pairs.vector(k);
        for i in 0..n {
            coords[i * p + k] = v[i] * scales[k];
        }
    }
    PointCloud::new(n, p, coords).expect("eigenvector entries are finite")
}

/// Spectral embedding X = U |S|^(1/2) from the top-p magnitude eigenpairs.
pub fn spectral_embed(a: &SimilarityMatrix, p: usize) -> Result<PointCloud> {
    spectral_embed_with(a, p, &EigsOptions::default()).map(|(c, _)| c)
}

/// As [`spectral_embed`], also returning the eigenvalues used.
pub fn spectral_embed_with(
    a: &SimilarityMatrix,
    p: usize,
    opts: &EigsOptions,
) -> Result<(PointCloud, Vec<f64>)> {
    let pairs = symmetric_eigs_with(a, p, opts)?;
    let cloud = embed_from_eigs(&pairs);
    Ok((cloud, pairs.values))
}

/// Profile-likelihood split of a spectrum into signal and noise groups.
///
/// The spectrum must be sorted by descending absolute value; the split is
/// chosen over magnitudes. Each candidate q models the first q magnitudes and
/// the rest as two Gaussians with separate means and a shared (pooled MLE)
/// variance; the q maximising the profile log-likelihood wins. Splits with
/// zero pooled variance are treated as infinitely likely; among ties the
/// smallest q is returned, so a flat spectrum yields 1.
pub fn select_rank(spectrum: &[f64], max_p: usize) -> Result<usize> {
    if spectrum.len() < 2 {
        return Err(Error::Validation(format!(
            "rank selection needs a spectrum of length >= 2, got {}",
            spectrum.len()
        )));
    }
    if max_p == 0 {
        return Err(Error::Validation("max_p must be >= 1".into()));
    }
    let mags: Vec<f64> = spectrum.iter().map(|v| v.abs()).collect();
    if mags.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Validation(
            "spectrum is not sorted by descending absolute value".into(),
        ));
    }
    let n = mags.len();
    let q_max = max_p.min(n - 1);

    let mut best_q = 1usize;
    let mut best_ll = f64::NEG_INFINITY;
    let mut best_degenerate = false;
    for q in 1..=q_max {
        let (head, tail) = mags.split_at(q);
        let m1: f64 = head.iter().sum::<f64>() / q as f64;
        let m2: f64 = tail.iter().sum::<f64>() / tail.len() as f64;
        let ss: f64 = head.iter().map(|v| (v - m1) * (v - m1)).sum::<f64>()
            + tail.iter().map(|v| (v - m2) * (v - m2)).sum::<f64>();
        let var = ss / n as f64;
        if var == 0.0 {
            if !best_degenerate {
                best_degenerate = true;
                best_q = q;
            }
            continue;
        }
        if best_degenerate {
            continue;
        }
        let ll = -0.5 * n as f64 * var.ln();
        if ll > best_ll {
            best_ll = ll;
            best_q = q;
        }
    }
    Ok(best_q)
}

/// Projects each row of the cloud to the unit sphere. Rows with norm below
/// 1e-12 are dropped; their indices are returned alongside the result.
pub fn degree_correct(x: &PointCloud) -> (PointCloud, Vec<usize>) {
    let mut rows = Vec::with_capacity(x.n());
    let mut dropped = Vec::new();
    for (i, r) in x.rows().enumerate() {
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            dropped.push(i);
        } else {
            rows.push(r.iter().map(|v| v / norm).collect::<Vec<f64>>());
        }
    }
    let cloud = if rows.is_empty() {
        PointCloud::new(0, x.dim(), Vec::new()).expect("dim >= 1")
    } else {
        PointCloud::from_rows(&rows).expect("normalised rows are finite")
    };
    (cloud, dropped)
}

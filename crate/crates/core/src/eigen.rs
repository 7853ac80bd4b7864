//! Symmetric eigendecomposition and double-centering.
//!
//! Two solver paths sit behind [`symmetric_eigs`]: a dense path (full
//! tridiagonalisation via nalgebra) for `n <= dense_threshold`, and a Lanczos
//! iteration with full reorthogonalisation above it. Both order eigenpairs by
//! descending absolute eigenvalue, break magnitude ties toward the positive
//! eigenvalue, and are deterministic: fixed tie-breaking, and a fixed starting
//! vector for the iterative path derived from a [`Seed`].

use nalgebra::DMatrix;
use rand::Rng;

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::matrix::SimilarityMatrix;
use crate::rng::{stream_rng, Seed, StreamDomain};

/// Eigenvalues and orthonormal eigenvectors of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    n: usize,
    /// Eigenvalues ordered by descending |value|, magnitude ties broken
    /// toward the positive value, then by lowest original index.
    pub values: Vec<f64>,
    /// Column-major n x p eigenvector block, columns matching `values`.
    vectors: Vec<f64>,
}

impl EigenPairs {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.values.len()
    }

    /// The k-th eigenvector (unit norm).
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }
}

/// Options for [`symmetric_eigs_with`].
#[derive(Debug, Clone)]
pub struct EigsOptions {
    /// Use the dense path when n is at most this. Default 2048.
    pub dense_threshold: usize,
    /// Relative residual tolerance for the iterative path.
    pub tol: f64,
    /// Maximum Lanczos steps before reporting non-convergence.
    pub max_iter: usize,
    /// Seed for the deterministic starting vector of the iterative path.
    pub seed: Seed,
}

impl Default for EigsOptions {
    fn default() -> Self {
        EigsOptions {
            dense_threshold: 2048,
            tol: 1e-6,
            max_iter: 600,
            seed: Seed::new(0x9E3779B97F4A7C15),
        }
    }
}

/// Indices of `values` ordered by descending |value|, ties by descending
/// signed value, then by lowest original index.
pub(crate) fn magnitude_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let (va, vb) = (values[a], values[b]);
        vb.abs()
            .partial_cmp(&va.abs())
            .unwrap()
            .then(vb.partial_cmp(&va).unwrap())
            .then(a.cmp(&b))
    });
    idx
}

/// Top-p eigenpairs of a symmetric matrix, ordered by descending |eigenvalue|.
pub fn symmetric_eigs(m: &SimilarityMatrix, p: usize) -> Result<EigenPairs> {
    symmetric_eigs_with(m, p, &EigsOptions::default())
}

pub fn symmetric_eigs_with(m: &SimilarityMatrix, p: usize, opts: &EigsOptions) -> Result<EigenPairs> {
    let n = m.n();
    if p == 0 || p > n {
        return Err(Error::Dimension(format!(
            "requested p = {p} eigenpairs of a {n}x{n} matrix"
        )));
    }
    if !m.all_finite() {
        return Err(Error::Validation("matrix has non-finite entries".into()));
    }
    if n <= opts.dense_threshold {
        dense_eigs(m, p)
    } else {
        lanczos_eigs(m, p, opts)
    }
}

fn dense_eigs(m: &SimilarityMatrix, p: usize) -> Result<EigenPairs> {
    let n = m.n();
    let a = DMatrix::from_row_slice(n, n, &m.to_dense());
    let decomp = a.symmetric_eigen();
    let values: Vec<f64> = decomp.eigenvalues.iter().copied().collect();
    let order = magnitude_order(&values);
    let mut out_values = Vec::with_capacity(p);
    let mut out_vectors = Vec::with_capacity(p * n);
    for &k in order.iter().take(p) {
        out_values.push(values[k]);
        out_vectors.extend(decomp.eigenvectors.column(k).iter());
    }
    Ok(EigenPairs {
        n,
        values: out_values,
        vectors: out_vectors,
    })
}

/// All eigenpairs of a small dense symmetric matrix given row-major, returned
/// in descending signed order. Used by CMDS and the metric-tensor checks.
pub(crate) fn dense_symmetric_eigen_desc(n: usize, data: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let a = DMatrix::from_row_slice(n, n, data);
    let decomp = a.symmetric_eigen();
    let values: Vec<f64> = decomp.eigenvalues.iter().copied().collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    let mut out_values = Vec::with_capacity(n);
    let mut out_vectors = Vec::with_capacity(n * n);
    for &k in &idx {
        out_values.push(values[k]);
        out_vectors.extend(decomp.eigenvectors.column(k).iter());
    }
    (out_values, out_vectors)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lanczos with full reorthogonalisation. The Krylov basis is kept in full;
/// restarts with fresh orthogonal vectors handle breakdown (invariant
/// subspaces smaller than the requested count).
fn lanczos_eigs(m: &SimilarityMatrix, p: usize, opts: &EigsOptions) -> Result<EigenPairs> {
    let n = m.n();
    let max_steps = opts.max_iter.min(n);
    if max_steps < p {
        return Err(Error::Validation(format!(
            "max_iter = {} cannot produce {p} eigenpairs",
            opts.max_iter
        )));
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_steps);
    // alphas[k] couples basis[k] with itself; betas[k] couples basis[k] with
    // basis[k+1] (0.0 across restart boundaries).
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let mut start_index = 0u64;
    let mut v = fresh_start_vector(n, opts.seed, &mut start_index, &basis)?;
    let mut w = vec![0.0; n];
    let scale_floor = (m.frobenius_norm() / (n as f64).sqrt()).max(f64::MIN_POSITIVE);
    let mut last_residual = f64::INFINITY;

    for step in 0..max_steps {
        m.matvec(&v, &mut w);
        let alpha = dot(&w, &v);
        basis.push(v.clone());
        alphas.push(alpha);

        // Full reorthogonalisation, two passes.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let beta = norm(&w);

        let enough = basis.len() >= p;
        let check_now = enough && (basis.len() % 5 == 0 || step + 1 == max_steps);
        if check_now || (enough && beta <= 1e-13 * scale_floor) {
            if let Some((vals, vecs, _residual)) =
                ritz_pairs(m, &basis, &alphas, &betas, beta, p, opts.tol)
            {
                return Ok(finish_ritz(n, vals, vecs));
            } else if let Some(r) = current_residual(&alphas, &betas, beta, p) {
                last_residual = r;
            }
        }

        if beta <= 1e-13 * scale_floor {
            // Invariant subspace exhausted: restart with a fresh direction.
            if basis.len() == n {
                break;
            }
            betas.push(0.0);
            v = fresh_start_vector(n, opts.seed, &mut start_index, &basis)?;
        } else {
            betas.push(beta);
            for wi in &mut w {
                *wi /= beta;
            }
            v = w.clone();
        }
    }

    // Full basis reached: the tridiagonal eigenproblem is exact.
    if basis.len() == n {
        if let Some((vals, vecs, _)) =
            ritz_pairs(m, &basis, &alphas, &betas, 0.0, p, f64::INFINITY)
        {
            return Ok(finish_ritz(n, vals, vecs));
        }
    }

    Err(Error::Convergence(format!(
        "Lanczos did not converge after {} steps; worst relative residual {:.3e} (tolerance {:.1e})",
        max_steps, last_residual, opts.tol
    )))
}

fn fresh_start_vector(
    n: usize,
    seed: Seed,
    start_index: &mut u64,
    basis: &[Vec<f64>],
) -> Result<Vec<f64>> {
    for _ in 0..32 {
        let mut rng = stream_rng(seed, StreamDomain::EigenStart, *start_index);
        *start_index += 1;
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        for _ in 0..2 {
            for q in basis {
                let c = dot(&v, q);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            for vi in &mut v {
                *vi /= nv;
            }
            return Ok(v);
        }
    }
    Err(Error::Convergence(
        "could not generate a starting vector orthogonal to the Krylov basis".into(),
    ))
}

/// Tridiagonal (block) matrix assembled from alphas/betas, as dense row-major.
fn tridiagonal_dense(alphas: &[f64], betas: &[f64]) -> Vec<f64> {
    let k = alphas.len();
    let mut t = vec![0.0; k * k];
    for i in 0..k {
        t[i * k + i] = alphas[i];
        if i + 1 < k {
            let b = betas.get(i).copied().unwrap_or(0.0);
            t[i * k + i + 1] = b;
            t[(i + 1) * k + i] = b;
        }
    }
    t
}

/// Residual bound of the current top-p Ritz pairs (for error reporting).
fn current_residual(alphas: &[f64], betas: &[f64], beta_last: f64, p: usize) -> Option<f64> {
    let k = alphas.len();
    if k < p {
        return None;
    }
    let (vals, vecs) = dense_symmetric_eigen_desc(k, &tridiagonal_dense(alphas, betas));
    let order = magnitude_order(&vals);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let worst = order
        .iter()
        .take(p)
        .map(|&i| beta_last * vecs[i * k + k - 1].abs() / scale)
        .fold(0.0f64, f64::max);
    Some(worst)
}

/// If the top-p Ritz pairs of the current basis meet the tolerance, returns
/// (values, vectors, residual); vectors are assembled from the basis and
/// validated against the matrix directly.
fn ritz_pairs(
    m: &SimilarityMatrix,
    basis: &[Vec<f64>],
    alphas: &[f64],
    betas: &[f64],
    beta_last: f64,
    p: usize,
    tol: f64,
) -> Option<(Vec<f64>, Vec<Vec<f64>>, f64)> {
    let k = alphas.len();
    if k < p {
        return None;
    }
    let n = basis[0].len();
    let (vals, vecs) = dense_symmetric_eigen_desc(k, &tridiagonal_dense(alphas, betas));
    let order = magnitude_order(&vals);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);

    let mut bound = 0.0f64;
    for &i in order.iter().take(p) {
        bound = bound.max(beta_last * vecs[i * k + k - 1].abs() / scale);
    }
    if bound > tol && tol.is_finite() {
        return None;
    }

    let mut out_vals = Vec::with_capacity(p);
    let mut out_vecs = Vec::with_capacity(p);
    let mut worst = 0.0f64;
    let mut av = vec![0.0; n];
    for &i in order.iter().take(p) {
        let mut x = vec![0.0; n];
        for (j, q) in basis.iter().enumerate() {
            let s = vecs[i * k + j];
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi += s * qi;
            }
        }
        let nx = norm(&x);
        if nx < 1e-12 {
            return None;
        }
        for xi in &mut x {
            *xi /= nx;
        }
        m.matvec(&x, &mut av);
        let lam = vals[i];
        let res: f64 = av
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - lam * b) * (a - lam * b))
            .sum::<f64>()
            .sqrt()
            / scale;
        worst = worst.max(res);
        out_vals.push(lam);
        out_vecs.push(x);
    }
    if worst > tol && tol.is_finite() {
        return None;
    }
    Some((out_vals, out_vecs, worst))
}

fn finish_ritz(n: usize, values: Vec<f64>, vectors: Vec<Vec<f64>>) -> EigenPairs {
    let mut flat = Vec::with_capacity(values.len() * n);
    for v in vectors {
        flat.extend(v);
    }
    EigenPairs {
        n,
        values,
        vectors: flat,
    }
}

/// Double-centers the elementwise square of a distance matrix:
/// B = -1/2 J D^(2) J with J = I - (1/n) 1 1^T. Row sums of B are zero.
///
/// Infinite entries are rejected; restrict to a connected component first.
pub fn double_center(d: &DistanceMatrix) -> Result<Vec<f64>> {
    let n = d.n();
    if let Some((i, j)) = d.first_infinite() {
        return Err(Error::Data(format!(
            "distance ({i}, {j}) is infinite; restrict to a connected component before double-centering"
        )));
    }
    let mut sq = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let v = d.get(i, j);
            sq[i * n + j] = v * v;
        }
    }
    let mut row_means = vec![0.0; n];
    for i in 0..n {
        row_means[i] = sq[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64;
    }
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = -0.5 * (sq[i * n + j] - row_means[i] - row_means[j] + grand);
            b[i * n + j] = v;
            b[j * n + i] = v;
        }
    }
    Ok(b)
}

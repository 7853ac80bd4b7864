//! Alignment and diagnostics: Procrustes with scaling, recovery error,
//! Spearman monotonicity, geodesic-vs-latent regression, and a balanced
//! Earth Mover's distance with an exact assignment solver.

use nalgebra::DMatrix;
use rand::seq::index::sample as index_sample;

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::points::PointCloud;
use crate::rng::{stream_rng, Seed, StreamDomain};

/// Optimal similarity transform from one cloud onto another.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    pub scale: f64,
    /// Row-major d x d orthogonal matrix; reflections (det = -1) allowed.
    pub rotation: Vec<f64>,
    pub translation: Vec<f64>,
    /// Per-point root-mean-square residual after alignment.
    pub residual_rms: f64,
}

impl AlignmentResult {
    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    /// Applies s Q x + t to every row.
    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        let d = self.dim();
        let mut coords = Vec::with_capacity(cloud.n() * d);
        for row in cloud.rows() {
            for i in 0..d {
                let mut v = self.translation[i];
                for j in 0..d {
                    v += self.scale * self.rotation[i * d + j] * row[j];
                }
                coords.push(v);
            }
        }
        PointCloud::new(cloud.n(), d, coords).expect("affine image of finite points")
    }
}

fn centered(cloud: &PointCloud) -> (Vec<f64>, Vec<f64>) {
    let means = cloud.column_means();
    let d = cloud.dim();
    let mut out = Vec::with_capacity(cloud.n() * d);
    for row in cloud.rows() {
        for (v, m) in row.iter().zip(&means) {
            out.push(v - m);
        }
    }
    (out, means)
}

/// Minimizes sum_i ||s Q source_i + t - target_i||^2 over scale s > 0,
/// orthogonal Q and translation t, via the SVD construction on centered
/// clouds.
pub fn procrustes_align(source: &PointCloud, target: &PointCloud) -> Result<AlignmentResult> {
    if source.n() != target.n() || source.dim() != target.dim() {
        return Err(Error::Dimension(format!(
            "clouds differ: {}x{} vs {}x{}",
            source.n(),
            source.dim(),
            target.n(),
            target.dim()
        )));
    }
    let (n, d) = (source.n(), source.dim());
    if n < d {
        return Err(Error::Dimension(format!(
            "need at least d = {d} points, got {n}"
        )));
    }
    let (sc, s_mean) = centered(source);
    let (tc, t_mean) = centered(target);
    let source_ss: f64 = sc.iter().map(|v| v * v).sum();
    if source_ss == 0.0 {
        return Err(Error::Data(
            "degenerate source: all points identical".into(),
        ));
    }

    // Cross-covariance C = sum_i t_i s_i^T over centered rows.
    let mut c = DMatrix::zeros(d, d);
    for i in 0..n {
        for a in 0..d {
            for b in 0..d {
                c[(a, b)] += tc[i * d + a] * sc[i * d + b];
            }
        }
    }
    let svd = c.svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let q = u * vt;
    let trace_sigma: f64 = svd.singular_values.iter().sum();

    let scale = trace_sigma / source_ss;
    let mut rotation = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            rotation[a * d + b] = q[(a, b)];
        }
    }
    let mut translation = vec![0.0; d];
    for a in 0..d {
        let mut rot_mean = 0.0;
        for b in 0..d {
            rot_mean += rotation[a * d + b] * s_mean[b];
        }
        translation[a] = t_mean[a] - scale * rot_mean;
    }
    // Residual evaluated directly; the closed form
    // target_ss - tr(Sigma)^2 / source_ss cancels catastrophically near zero.
    let mut result = AlignmentResult {
        scale,
        rotation,
        translation,
        residual_rms: 0.0,
    };
    let moved = result.apply(source);
    let mut residual_sq = 0.0;
    for i in 0..n {
        for (a, b) in moved.row(i).iter().zip(target.row(i)) {
            residual_sq += (a - b) * (a - b);
        }
    }
    result.residual_rms = (residual_sq / n as f64).sqrt();
    Ok(result)
}

/// Optimal orthogonal Q (no scaling, no translation) minimizing
/// ||Q source - target||_F. Used for embedding-consistency checks where the
/// identifiability class is a plain orthogonal transform.
pub fn orthogonal_align(source: &PointCloud, target: &PointCloud) -> Result<Vec<f64>> {
    if source.n() != target.n() || source.dim() != target.dim() {
        return Err(Error::Dimension(format!(
            "clouds differ: {}x{} vs {}x{}",
            source.n(),
            source.dim(),
            target.n(),
            target.dim()
        )));
    }
    let (n, d) = (source.n(), source.dim());
    let mut c = DMatrix::zeros(d, d);
    for i in 0..n {
        let (s, t) = (source.row(i), target.row(i));
        for a in 0..d {
            for b in 0..d {
                c[(a, b)] += t[a] * s[b];
            }
        }
    }
    let svd = c.svd(true, true);
    let q = svd.u.as_ref().expect("svd with u") * svd.v_t.as_ref().expect("svd with v_t");
    let mut rotation = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            rotation[a * d + b] = q[(a, b)];
        }
    }
    Ok(rotation)
}

/// Per-point RMS residual of the optimal similarity alignment of `zhat`
/// onto `z`.
pub fn recovery_error(zhat: &PointCloud, z: &PointCloud) -> Result<f64> {
    Ok(procrustes_align(zhat, z)?.residual_rms)
}

/// Average ranks with ties sharing their mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation between a recovered 1-D coordinate and a
/// covariate; ties handled by average ranks.
pub fn monotonicity_diagnostic(zhat_1d: &[f64], covariate: &[f64]) -> Result<f64> {
    if zhat_1d.len() != covariate.len() {
        return Err(Error::Dimension(format!(
            "length mismatch: {} vs {}",
            zhat_1d.len(),
            covariate.len()
        )));
    }
    if zhat_1d.len() < 3 {
        return Err(Error::Validation("need at least 3 observations".into()));
    }
    if zhat_1d.iter().any(|v| !v.is_finite()) || covariate.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite observations".into()));
    }
    let rx = average_ranks(zhat_1d);
    let ry = average_ranks(covariate);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in rx.iter().zip(&ry) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Data(
            "constant input: rank correlation is undefined".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Least-squares fit through the origin of estimated geodesics against true
/// latent distances.
#[derive(Debug, Clone, Copy)]
pub struct RegressionResult {
    pub slope: f64,
    pub r2: f64,
    /// Finite pairs entering the fit.
    pub pairs_used: usize,
    /// Pairs excluded because either distance was infinite.
    pub excluded_infinite: usize,
}

/// Regression of `dhat` entries on `dz` entries over the strict upper
/// triangle: slope through the origin plus R^2. Since the model has no
/// intercept, R^2 is the uncentered convention 1 - SS_res / sum(y^2), as
/// reported by standard statistical software for intercept-free fits.
pub fn geodesic_regression(dhat: &DistanceMatrix, dz: &DistanceMatrix) -> Result<RegressionResult> {
    if dhat.n() != dz.n() {
        return Err(Error::Dimension(format!(
            "distance matrices differ in size: {} vs {}",
            dhat.n(),
            dz.n()
        )));
    }
    let n = dhat.n();
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    let mut excluded = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let x = dz.get(i, j);
            let y = dhat.get(i, j);
            if !x.is_finite() || !y.is_finite() {
                excluded += 1;
                continue;
            }
            sxy += x * y;
            sxx += x * x;
            xs.push(x);
            ys.push(y);
        }
    }
    if xs.len() < 2 {
        return Err(Error::Data(format!(
            "need at least 2 finite pairs, got {}",
            xs.len()
        )));
    }
    if sxx == 0.0 {
        return Err(Error::Data("all latent distances are zero".into()));
    }
    let slope = sxy / sxx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x) * (y - slope * x))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| y * y).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RegressionResult {
        slope,
        r2,
        pairs_used: xs.len(),
        excluded_infinite: excluded,
    })
}

/// Exact minimum-cost balanced assignment (Hungarian / shortest augmenting
/// path, O(n^3)). Returns the column assigned to each row and the total cost
/// summed in row order.
pub fn min_cost_assignment(costs: &[f64], n: usize) -> Result<(Vec<usize>, f64)> {
    if costs.len() != n * n {
        return Err(Error::Dimension(format!(
            "expected {} costs, got {}",
            n * n,
            costs.len()
        )));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Data("assignment costs must be finite".into()));
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    let total: f64 = (0..n).map(|i| costs[i * n + assignment[i]]).sum();
    Ok((assignment, total))
}

#[derive(Debug, Clone, Copy)]
pub struct EmdResult {
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
}

/// Balanced Earth Mover's distance between two index groups under the given
/// distance matrix: per repetition, `sample` indices are drawn uniformly
/// without replacement from each group and matched by an exact assignment;
/// EMD is the assignment cost divided by `sample`. Reproducible under the
/// seed; repetitions use derived streams.
pub fn earth_mover_distance(
    d: &DistanceMatrix,
    group_a: &[usize],
    group_b: &[usize],
    sample: usize,
    seed: Seed,
    reps: usize,
) -> Result<EmdResult> {
    if sample == 0 || reps == 0 {
        return Err(Error::Validation("sample and reps must be >= 1".into()));
    }
    if group_a.len() < sample || group_b.len() < sample {
        return Err(Error::Validation(format!(
            "groups of sizes {} and {} cannot supply {sample} samples",
            group_a.len(),
            group_b.len()
        )));
    }
    for &i in group_a.iter().chain(group_b) {
        if i >= d.n() {
            return Err(Error::Dimension(format!(
                "group index {i} outside distance matrix of size {}",
                d.n()
            )));
        }
    }
    let mut values = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rng = stream_rng(seed, StreamDomain::EmdRep, rep as u64);
        let pick_a: Vec<usize> = index_sample(&mut rng, group_a.len(), sample)
            .into_iter()
            .map(|k| group_a[k])
            .collect();
        let pick_b: Vec<usize> = index_sample(&mut rng, group_b.len(), sample)
            .into_iter()
            .map(|k| group_b[k])
            .collect();
        let mut costs = vec![0.0; sample * sample];
        for (r, &i) in pick_a.iter().enumerate() {
            for (c, &j) in pick_b.iter().enumerate() {
                let v = d.get(i, j);
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "infinite distance between sampled points {i} and {j}; restrict to the largest connected component first"
                    )));
                }
                costs[r * sample + c] = v;
            }
        }
        let (_, total) = min_cost_assignment(&costs, sample)?;
        values.push(total / sample as f64);
    }
    let mean = values.iter().sum::<f64>() / reps as f64;
    let stderr = if reps > 1 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps - 1) as f64;
        (var / reps as f64).sqrt()
    } else {
        0.0
    };
    Ok(EmdResult { mean, stderr, reps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_cloud(n: usize, d: usize, tag: u64) -> PointCloud {
        let mut rng = stream_rng(Seed::new(61), StreamDomain::EigenStart, tag);
        let coords: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        PointCloud::new(n, d, coords).unwrap()
    }

    fn rotation_2d(theta: f64) -> [f64; 4] {
        [theta.cos(), -theta.sin(), theta.sin(), theta.cos()]
    }

    #[test]
    fn recovers_exact_similarity_transform() {
        let source = random_cloud(40, 2, 80);
        let r = rotation_2d(0.7);
        let (s, t) = (2.0, [0.3, -1.1]);
        let rows: Vec<Vec<f64>> = source
            .rows()
            .map(|row| {
                vec![
                    s * (r[0] * row[0] + r[1] * row[1]) + t[0],
                    s * (r[2] * row[0] + r[3] * row[1]) + t[1],
                ]
            })
            .collect();
        let target = PointCloud::from_rows(&rows).unwrap();
        let a = procrustes_align(&source, &target).unwrap();
        assert!((a.scale - 2.0).abs() < 1e-10);
        for (got, want) in a.rotation.iter().zip(&r) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!(a.residual_rms <= 1e-10);
    }

    #[test]
    fn identity_alignment() {
        let cloud = random_cloud(10, 3, 81);
        let a = procrustes_align(&cloud, &cloud).unwrap();
        assert!((a.scale - 1.0).abs() < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((a.rotation[i * 3 + j] - expect).abs() < 1e-10);
            }
        }
        assert!(a.translation.iter().all(|v| v.abs() < 1e-12));
        assert!(a.residual_rms < 1e-12);
    }

    #[test]
    fn degenerate_source_errors() {
        let source = PointCloud::from_rows(&vec![vec![1.0, 1.0]; 5]).unwrap();
        let target = random_cloud(5, 2, 82);
        assert!(matches!(
            procrustes_align(&source, &target),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn alignment_invariance_of_recovery_error() {
        let z = random_cloud(30, 2, 83);
        let zhat = random_cloud(30, 2, 84);
        let base = recovery_error(&zhat, &z).unwrap();
        let r = rotation_2d(-1.2);
        let transform = AlignmentResult {
            scale: 3.7,
            rotation: r.to_vec(),
            translation: vec![5.0, -2.0],
            residual_rms: 0.0,
        };
        let moved = transform.apply(&zhat);
        let after = recovery_error(&moved, &z).unwrap();
        assert!((base - after).abs() <= 1e-9, "{base} vs {after}");
    }

    #[test]
    fn spearman_examples() {
        let zhat = [0.3, -1.0, 2.0, 0.7, 0.0];
        let cov: Vec<f64> = zhat.to_vec();
        assert_eq!(monotonicity_diagnostic(&zhat, &cov).unwrap(), 1.0);
        let neg: Vec<f64> = zhat.iter().map(|v| -v).collect();
        assert_eq!(monotonicity_diagnostic(&zhat, &neg).unwrap(), -1.0);
        let cubed: Vec<f64> = zhat.iter().map(|v| v.powi(3)).collect();
        assert_eq!(monotonicity_diagnostic(&zhat, &cubed).unwrap(), 1.0);
    }

    #[test]
    fn spearman_ties_and_errors() {
        // Ties get average ranks.
        let a = [1.0, 1.0, 2.0, 3.0];
        let b = [1.0, 2.0, 3.0, 4.0];
        let rho = monotonicity_diagnostic(&a, &b).unwrap();
        assert!(rho > 0.9 && rho < 1.0);
        assert!(matches!(
            monotonicity_diagnostic(&[1.0, 1.0, 1.0], &b[..3]),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn regression_exact_proportionality() {
        let z = random_cloud(12, 2, 85);
        let dz = DistanceMatrix::euclidean(&z);
        let half: Vec<f64> = dz.entries().iter().map(|v| 0.5 * v).collect();
        let dhat = DistanceMatrix::new(12, half).unwrap();
        let r = geodesic_regression(&dhat, &dz).unwrap();
        assert!((r.slope - 0.5).abs() < 1e-12);
        assert!((r.r2 - 1.0).abs() < 1e-12);
        let same = geodesic_regression(&dz, &dz).unwrap();
        assert!((same.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regression_excludes_infinite_pairs() {
        let inf = f64::INFINITY;
        let entries = vec![0.0, 1.0, inf, 1.0, 0.0, 2.0, inf, 2.0, 0.0];
        let dhat = DistanceMatrix::new(3, entries).unwrap();
        let z = PointCloud::from_scalars(&[0.0, 1.0, 3.0]).unwrap();
        let dz = DistanceMatrix::euclidean(&z);
        let r = geodesic_regression(&dhat, &dz).unwrap();
        assert_eq!(r.excluded_infinite, 1);
        assert_eq!(r.pairs_used, 2);
    }

    #[test]
    fn assignment_examples() {
        let (asg, cost) = min_cost_assignment(&[1.0, 10.0, 10.0, 1.0], 2).unwrap();
        assert_eq!(asg, vec![0, 1]);
        assert_eq!(cost, 2.0);
        // Off-diagonal optimum.
        let (asg, cost) = min_cost_assignment(&[5.0, 1.0, 1.0, 5.0], 2).unwrap();
        assert_eq!(asg, vec![1, 0]);
        assert_eq!(cost, 2.0);
    }

    #[test]
    fn emd_trivial_cases() {
        let z = PointCloud::from_scalars(&[0.0, 1.0, 5.0, 6.0]).unwrap();
        let d = DistanceMatrix::euclidean(&z);
        // Identical groups with full sampling: identity assignment, EMD 0.
        let r = earth_mover_distance(&d, &[0, 1], &[0, 1], 2, Seed::new(4), 1).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.stderr, 0.0);

        // Singleton groups: EMD is just the distance.
        let r = earth_mover_distance(&d, &[0], &[2], 1, Seed::new(4), 3).unwrap();
        assert_eq!(r.mean, 5.0);
    }

    #[test]
    fn emd_sample_one_reduces_to_mean_distance() {
        let z = PointCloud::from_scalars(&[0.0, 1.0, 10.0, 11.0]).unwrap();
        let d = DistanceMatrix::euclidean(&z);
        let (ga, gb) = (vec![0, 1], vec![2, 3]);
        let reps = 64;
        let r = earth_mover_distance(&d, &ga, &gb, 1, Seed::new(8), reps).unwrap();
        // Cross-check directly with the same streams.
        let mut total = 0.0;
        for rep in 0..reps {
            let mut rng = stream_rng(Seed::new(8), StreamDomain::EmdRep, rep as u64);
            let a = ga[index_sample(&mut rng, 2, 1).index(0)];
            let b = gb[index_sample(&mut rng, 2, 1).index(0)];
            total += d.get(a, b);
        }
        assert!((r.mean - total / reps as f64).abs() < 1e-12);
    }

    #[test]
    fn emd_rejects_infinite_costs() {
        let d = DistanceMatrix::new(2, vec![0.0, f64::INFINITY, f64::INFINITY, 0.0]).unwrap();
        match earth_mover_distance(&d, &[0], &[1], 1, Seed::new(1), 1) {
            Err(Error::Data(msg)) => assert!(msg.contains("component")),
            other => panic!("expected data error, got {other:?}"),
        }
    }
}

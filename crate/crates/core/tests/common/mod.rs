//! Independent oracles shared by the integration and acceptance suites.
//! These deliberately avoid the library's own code paths: textbook
//! implementations checked against hand examples, used to validate the
//! production implementations.

#![allow(dead_code)]

use geolift_core::points::PointCloud;
use geolift_core::rng::{stream_rng, Seed, StreamDomain};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(tag: u64) -> ChaCha8Rng {
    stream_rng(Seed::new(0xACCE97), StreamDomain::EigenStart, tag)
}

pub fn random_cloud(n: usize, dim: usize, tag: u64) -> PointCloud {
    let mut r = rng(tag);
    let coords: Vec<f64> = (0..n * dim).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
    PointCloud::new(n, dim, coords).unwrap()
}

/// Cyclic Jacobi eigenvalue iteration for a dense symmetric matrix.
/// Returns eigenvalues only, unsorted.
pub fn jacobi_eigenvalues(n: usize, a: &[f64]) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}

/// Floyd-Warshall all-pairs shortest paths over undirected weighted edges.
pub fn floyd_warshall(n: usize, edges: &[(u32, u32, f64)]) -> Vec<f64> {
    let mut d = vec![f64::INFINITY; n * n];
    for i in 0..n {
        d[i * n + i] = 0.0;
    }
    for &(i, j, w) in edges {
        let (i, j) = (i as usize, j as usize);
        if w < d[i * n + j] {
            d[i * n + j] = w;
            d[j * n + i] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[i * n + k];
            if dik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let cand = dik + d[k * n + j];
                if cand < d[i * n + j] {
                    d[i * n + j] = cand;
                }
            }
        }
    }
    d
}

fn connected_at(cloud: &PointCloud, eps: f64) -> bool {
    let n = cloud.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if cloud.distance(i, j) <= eps {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let root = find(&mut parent, 0);
    (1..n).all(|i| find(&mut parent, i) == root)
}

/// Bisection for the smallest epsilon connecting the epsilon-graph.
pub fn bisection_min_epsilon(cloud: &PointCloud, tol: f64) -> f64 {
    let n = cloud.n();
    let mut hi = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            hi = hi.max(cloud.distance(i, j));
        }
    }
    let mut lo = 0.0f64;
    if connected_at(cloud, lo) {
        return 0.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if connected_at(cloud, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Exhaustive minimum-cost assignment by permutation enumeration (n <= 8).
pub fn brute_force_assignment(costs: &[f64], n: usize) -> (Vec<usize>, f64) {
    assert!(n <= 8, "factorial enumeration only");
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    permute(&mut perm, 0, &mut |p| {
        let cost: f64 = (0..n).map(|i| costs[i * n + p[i]]).sum();
        match &best {
            Some((_, b)) if *b <= cost => {}
            _ => best = Some((p.to_vec(), cost)),
        }
    });
    best.unwrap()
}

fn permute(arr: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == arr.len() {
        visit(arr);
        return;
    }
    for i in k..arr.len() {
        arr.swap(k, i);
        permute(arr, k + 1, visit);
        arr.swap(k, i);
    }
}

/// Direct profile-likelihood rank selection: per-point Gaussian log-density
/// with group means and a shared pooled-MLE variance. Returns the smallest
/// maximizing split; splits with zero variance dominate.
pub fn brute_force_profile_rank(spectrum: &[f64], max_p: usize) -> usize {
    let mags: Vec<f64> = spectrum.iter().map(|v| v.abs()).collect();
    let n = mags.len();
    let q_max = max_p.min(n - 1);
    let mut best_q = 1usize;
    let mut best = f64::NEG_INFINITY;
    let mut best_degenerate = false;
    for q in 1..=q_max {
        let m1 = mags[..q].iter().sum::<f64>() / q as f64;
        let m2 = mags[q..].iter().sum::<f64>() / (n - q) as f64;
        let ss: f64 = mags[..q].iter().map(|v| (v - m1) * (v - m1)).sum::<f64>()
            + mags[q..].iter().map(|v| (v - m2) * (v - m2)).sum::<f64>();
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
        let tau = (2.0 * std::f64::consts::PI * var).ln();
        let ll: f64 = mags
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let mu = if i < q { m1 } else { m2 };
                -0.5 * (tau + (v - mu) * (v - mu) / var)
            })
            .sum();
        if ll > best {
            best = ll;
            best_q = q;
        }
    }
    best_q
}

/// Residual of the best similarity transform found by a coarse grid plus
/// Nelder-Mead over (scale, angle, reflection) for 2-D clouds; the optimal
/// translation for given (s, Q) is analytic.
pub fn nm_procrustes_residual(source: &PointCloud, target: &PointCloud) -> f64 {
    assert_eq!(source.dim(), 2);
    let objective = |s: f64, theta: f64, refl: bool| -> f64 {
        if s <= 0.0 {
            return f64::INFINITY;
        }
        let (c, si) = (theta.cos(), theta.sin());
        // Q = R(theta) [* diag(1, -1) when reflected]
        let q = if refl {
            [c, si, si, -c]
        } else {
            [c, -si, si, c]
        };
        let n = source.n();
        // Optimal translation: mean(target) - s Q mean(source).
        let sm = source.column_means();
        let tm = target.column_means();
        let t = [
            tm[0] - s * (q[0] * sm[0] + q[1] * sm[1]),
            tm[1] - s * (q[2] * sm[0] + q[3] * sm[1]),
        ];
        let mut acc = 0.0;
        for i in 0..n {
            let p = source.row(i);
            let y = target.row(i);
            let x0 = s * (q[0] * p[0] + q[1] * p[1]) + t[0] - y[0];
            let x1 = s * (q[2] * p[0] + q[3] * p[1]) + t[1] - y[1];
            acc += x0 * x0 + x1 * x1;
        }
        (acc / n as f64).sqrt()
    };

    let mut best = f64::INFINITY;
    for refl in [false, true] {
        // Coarse grid.
        let mut seed = (1.0f64, 0.0f64);
        for gs in 0..40 {
            let s = 0.1 * 1.2f64.powi(gs);
            for gt in 0..64 {
                let theta = gt as f64 * std::f64::consts::TAU / 64.0;
                let v = objective(s, theta, refl);
                if v < objective(seed.0, seed.1, refl) {
                    seed = (s, theta);
                }
            }
        }
        // Nelder-Mead on (s, theta).
        let f = |p: &[f64; 2]| objective(p[0], p[1], refl);
        let mut simplex = [
            [seed.0, seed.1],
            [seed.0 * 1.05, seed.1],
            [seed.0, seed.1 + 0.05],
        ];
        for _ in 0..400 {
            simplex.sort_by(|a, b| f(a).partial_cmp(&f(b)).unwrap());
            let centroid = [
                0.5 * (simplex[0][0] + simplex[1][0]),
                0.5 * (simplex[0][1] + simplex[1][1]),
            ];
            let worst = simplex[2];
            let reflect = [
                centroid[0] + (centroid[0] - worst[0]),
                centroid[1] + (centroid[1] - worst[1]),
            ];
            if f(&reflect) < f(&simplex[0]) {
                let expand = [
                    centroid[0] + 2.0 * (centroid[0] - worst[0]),
                    centroid[1] + 2.0 * (centroid[1] - worst[1]),
                ];
                simplex[2] = if f(&expand) < f(&reflect) { expand } else { reflect };
            } else if f(&reflect) < f(&simplex[1]) {
                simplex[2] = reflect;
            } else {
                let contract = [
                    centroid[0] + 0.5 * (worst[0] - centroid[0]),
                    centroid[1] + 0.5 * (worst[1] - centroid[1]),
                ];
                if f(&contract) < f(&worst) {
                    simplex[2] = contract;
                } else {
                    for i in 1..3 {
                        simplex[i] = [
                            simplex[0][0] + 0.5 * (simplex[i][0] - simplex[0][0]),
                            simplex[0][1] + 0.5 * (simplex[i][1] - simplex[0][1]),
                        ];
                    }
                }
            }
        }
        simplex.sort_by(|a, b| f(a).partial_cmp(&f(b)).unwrap());
        best = best.min(f(&simplex[0]));
    }
    best
}

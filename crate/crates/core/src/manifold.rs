//! Isomap: neighbourhood graph, all-pairs geodesic approximation, classical
//! multidimensional scaling, plus the epsilon/k selection heuristics.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::eigen::{dense_symmetric_eigen_desc, double_center, magnitude_order, symmetric_eigs_with, EigsOptions};
use crate::error::{Error, Result};
use crate::matrix::{MatrixKind, SimilarityMatrix};
use crate::points::PointCloud;
use crate::spectral::{select_rank, RankChoice};

/// Realized neighbourhood rule of a built graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborRule {
    Epsilon(f64),
    Knn(usize),
}

/// Rule specification before resolution against the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborRuleConfig {
    /// Smallest epsilon that connects the graph (largest MST edge).
    EpsilonAuto,
    Epsilon(f64),
    /// Quantile of the pairwise Euclidean distances of the input cloud.
    EpsilonQuantile(f64),
    Knn(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentPolicy {
    RequireConnected,
    LargestComponent,
}

/// Configuration for [`isomap`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsomapConfig {
    pub rule: NeighborRuleConfig,
    /// Output dimension, or automatic selection from the double-centered
    /// geodesic spectrum.
    pub d: RankChoice,
    /// Candidate-split cap when `d = auto`.
    #[serde(default = "default_max_auto_d")]
    pub max_auto_d: usize,
    #[serde(default = "default_component_policy")]
    pub component_policy: ComponentPolicy,
}

fn default_max_auto_d() -> usize {
    10
}

fn default_component_policy() -> ComponentPolicy {
    ComponentPolicy::LargestComponent
}

impl Default for IsomapConfig {
    fn default() -> Self {
        IsomapConfig {
            rule: NeighborRuleConfig::EpsilonAuto,
            d: RankChoice::Fixed(2),
            max_auto_d: default_max_auto_d(),
            component_policy: default_component_policy(),
        }
    }
}

/// Sparse weighted undirected graph over n points; weights are Euclidean
/// distances. Zero weights occur only between coincident points.
#[derive(Debug, Clone)]
pub struct NeighborhoodGraph {
    n: usize,
    edges: Vec<(u32, u32, f64)>,
    adjacency: Vec<Vec<(u32, f64)>>,
    rule: NeighborRule,
}

impl NeighborhoodGraph {
    fn from_edges(n: usize, mut edges: Vec<(u32, u32, f64)>, rule: NeighborRule) -> Self {
        edges.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        edges.dedup_by_key(|e| (e.0, e.1));
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j, w) in &edges {
            adjacency[i as usize].push((j, w));
            adjacency[j as usize].push((i, w));
        }
        NeighborhoodGraph {
            n,
            edges,
            adjacency,
            rule,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as (i, j, weight) with i < j, sorted.
    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    pub fn rule(&self) -> NeighborRule {
        self.rule
    }

    pub fn neighbors(&self, i: usize) -> &[(u32, f64)] {
        &self.adjacency[i]
    }

    /// Connected components, largest first; ties broken by smallest contained
    /// index. Vertices within a component are sorted ascending.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &(v, _) in &self.adjacency[u] {
                    let v = v as usize;
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        comps
    }

    /// Induced subgraph on `kept` (ascending original indices), reindexed.
    pub fn induced_subgraph(&self, kept: &[usize]) -> NeighborhoodGraph {
        let mut position = vec![usize::MAX; self.n];
        for (new, &old) in kept.iter().enumerate() {
            position[old] = new;
        }
        let edges = self
            .edges
            .iter()
            .filter_map(|&(i, j, w)| {
                let (pi, pj) = (position[i as usize], position[j as usize]);
                (pi != usize::MAX && pj != usize::MAX).then_some((pi as u32, pj as u32, w))
            })
            .collect();
        NeighborhoodGraph::from_edges(kept.len(), edges, self.rule)
    }
}

/// The smallest epsilon for which the epsilon-graph is connected: the largest
/// edge weight of a Euclidean minimum spanning tree (exact, via Prim).
pub fn min_connecting_epsilon(x: &PointCloud) -> Result<f64> {
    let n = x.n();
    if n < 2 {
        return Err(Error::Validation(format!(
            "connectivity threshold needs at least 2 points, got {n}"
        )));
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    in_tree[0] = true;
    for j in 1..n {
        best[j] = x.distance(0, j);
    }
    let mut max_edge = 0.0f64;
    for _ in 1..n {
        let mut pick = usize::MAX;
        let mut pick_d = f64::INFINITY;
        for j in 0..n {
            if !in_tree[j] && best[j] < pick_d {
                pick_d = best[j];
                pick = j;
            }
        }
        in_tree[pick] = true;
        max_edge = max_edge.max(pick_d);
        for j in 0..n {
            if !in_tree[j] {
                let d = x.distance(pick, j);
                if d < best[j] {
                    best[j] = d;
                }
            }
        }
    }
    Ok(max_edge)
}

/// The q-quantile (nearest-rank) of the pairwise Euclidean distances of the
/// cloud. Used to realize `epsilon_quantile` rules.
pub fn pairwise_distance_quantile(x: &PointCloud, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) || q == 0.0 {
        return Err(Error::Validation(format!("quantile {q} outside (0, 1]")));
    }
    let n = x.n();
    if n < 2 {
        return Err(Error::Validation("quantile needs at least 2 points".into()));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(x.distance(i, j));
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((q * dists.len() as f64).ceil() as usize).clamp(1, dists.len());
    Ok(dists[rank - 1])
}

/// Builds the neighbourhood graph under the given realized rule.
///
/// Epsilon graphs connect pairs with distance <= epsilon. k-NN graphs are
/// symmetrized by union: an edge is kept if i is among j's k nearest or vice
/// versa, with distance ties broken by lower index. k is clamped to n-1.
pub fn build_neighborhood_graph(x: &PointCloud, rule: NeighborRule) -> Result<NeighborhoodGraph> {
    let n = x.n();
    let mut edges: Vec<(u32, u32, f64)> = Vec::new();
    match rule {
        NeighborRule::Epsilon(eps) => {
            if eps < 0.0 || !eps.is_finite() {
                return Err(Error::Validation(format!("epsilon {eps} must be >= 0 and finite")));
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = x.distance(i, j);
                    if d <= eps {
                        edges.push((i as u32, j as u32, d));
                    }
                }
            }
        }
        NeighborRule::Knn(k) => {
            if k == 0 {
                return Err(Error::Validation("k must be >= 1".into()));
            }
            let k = k.min(n.saturating_sub(1));
            for i in 0..n {
                let mut cand: Vec<(f64, usize)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (x.distance(i, j), j))
                    .collect();
                cand.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                for &(d, j) in cand.iter().take(k) {
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    edges.push((a as u32, b as u32, d));
                }
            }
        }
    }
    Ok(NeighborhoodGraph::from_edges(n, edges, rule))
}

/// All-pairs weighted shortest paths on the graph, with `f64::INFINITY` for
/// disconnected pairs. Single-source Dijkstra runs are independent and run in
/// parallel; the result does not depend on thread count. The upper triangle
/// is canonical so the output is exactly symmetric.
pub fn shortest_paths(g: &NeighborhoodGraph) -> DistanceMatrix {
    let n = g.n();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|source| dijkstra(g, source))
        .collect();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = rows[i][j];
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    DistanceMatrix::from_parts_unchecked(n, entries)
}

fn dijkstra(g: &NeighborhoodGraph, source: usize) -> Vec<f64> {
    let n = g.n();
    let mut dist = vec![f64::INFINITY; n];
    dist[source] = 0.0;
    // Nonnegative finite weights order correctly by IEEE-754 bit patterns.
    let mut heap: BinaryHeap<Reverse<(u64, u32)>> = BinaryHeap::new();
    heap.push(Reverse((0u64, source as u32)));
    while let Some(Reverse((dbits, u))) = heap.pop() {
        let d = f64::from_bits(dbits);
        let u = u as usize;
        if d > dist[u] {
            continue;
        }
        for &(v, w) in g.neighbors(u) {
            let nd = d + w;
            if nd < dist[v as usize] {
                dist[v as usize] = nd;
                heap.push(Reverse((nd.to_bits(), v)));
            }
        }
    }
    dist
}

/// Result of classical multidimensional scaling.
#[derive(Debug, Clone)]
pub struct CmdsOutput {
    pub points: PointCloud,
    /// Eigenvalues of the double-centered matrix, descending signed order
    /// (all of them on the dense path, the computed head otherwise).
    pub spectrum: Vec<f64>,
    /// Positive eigenpairs actually used for coordinates.
    pub positive_used: usize,
    /// Zero columns appended because fewer than `dim` positive eigenvalues
    /// existed.
    pub padded: usize,
}

/// Classical MDS: embed B = double_center(d) through its top `dim` positive
/// eigenpairs, coordinates v_k * lambda_k^(1/2), columns in descending
/// eigenvalue order. Negative eigenvalues are discarded, never
/// absolute-valued; missing positive directions pad with zero columns.
pub fn cmds(d: &DistanceMatrix, dim: usize) -> Result<CmdsOutput> {
    if dim == 0 {
        return Err(Error::Dimension("output dimension must be >= 1".into()));
    }
    let n = d.n();
    let b = double_center(d)?;
    let opts = EigsOptions::default();
    let (values, vectors) = if n <= opts.dense_threshold {
        dense_symmetric_eigen_desc(n, &b)
    } else {
        // Large case: compute a magnitude head with Lanczos and re-sort by
        // signed value; the head must cover the requested positive pairs.
        let want = (2 * dim + 16).min(n);
        let bm = SimilarityMatrix::dense(n, b, MatrixKind::Generic)?;
        let pairs = symmetric_eigs_with(&bm, want, &opts)?;
        let mut idx: Vec<usize> = (0..pairs.p()).collect();
        idx.sort_by(|&a, &c| pairs.values[c].partial_cmp(&pairs.values[a]).unwrap());
        let mut values = Vec::with_capacity(pairs.p());
        let mut vectors = Vec::with_capacity(pairs.p() * n);
        for &k in &idx {
            values.push(pairs.values[k]);
            vectors.extend_from_slice(pairs.vector(k));
        }
        (values, vectors)
    };

    let positive: Vec<usize> = (0..values.len()).filter(|&k| values[k] > 0.0).collect();
    let used = positive.len().min(dim);
    let mut coords = vec![0.0; n * dim];
    for (col, &k) in positive.iter().take(used).enumerate() {
        let scale = values[k].sqrt();
        let v = &vectors[k * n..(k + 1) * n];
        for i in 0..n {
            coords[i * dim + col] = v[i] * scale;
        }
    }
    Ok(CmdsOutput {
        points: PointCloud::new(n, dim, coords)?,
        spectrum: values,
        positive_used: used,
        padded: dim - used,
    })
}

/// Diagnostics reported by [`isomap`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsomapDiagnostics {
    /// Realized neighbourhood rule (resolved epsilon or k).
    pub rule: NeighborRule,
    /// Sizes of the connected components, largest first.
    pub component_sizes: Vec<usize>,
    /// Original indices dropped under the largest-component policy.
    pub dropped: Vec<usize>,
    /// Head of the double-centered geodesic spectrum in descending magnitude
    /// order (signed values), for output-dimension selection.
    pub centered_spectrum: Vec<f64>,
    /// Output dimension used.
    pub d_used: usize,
    /// Whether `d_used` came from automatic selection.
    pub d_auto: bool,
    /// Zero columns padded by CMDS.
    pub positive_deficiency: usize,
}

/// Result of the full Isomap procedure.
#[derive(Debug, Clone)]
pub struct IsomapOutput {
    pub points: PointCloud,
    /// Original indices of the rows of `points`, ascending.
    pub kept: Vec<usize>,
    /// Geodesic distance matrix over the kept vertices.
    pub geodesics: DistanceMatrix,
    pub diagnostics: IsomapDiagnostics,
}

/// Neighbourhood graph, shortest paths and CMDS in sequence.
pub fn isomap(x: &PointCloud, cfg: &IsomapConfig) -> Result<IsomapOutput> {
    let n = x.n();
    if n == 0 {
        return Err(Error::Validation("cannot run on an empty cloud".into()));
    }
    let rule = match cfg.rule {
        NeighborRuleConfig::EpsilonAuto => NeighborRule::Epsilon(if n == 1 {
            0.0
        } else {
            min_connecting_epsilon(x)?
        }),
        NeighborRuleConfig::Epsilon(e) => NeighborRule::Epsilon(e),
        NeighborRuleConfig::EpsilonQuantile(q) => {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::Validation(format!(
                    "epsilon quantile {q} outside (0, 1)"
                )));
            }
            NeighborRule::Epsilon(pairwise_distance_quantile(x, q)?)
        }
        NeighborRuleConfig::Knn(k) => NeighborRule::Knn(k),
    };
    let graph = build_neighborhood_graph(x, rule)?;
    let components = graph.components();
    let component_sizes: Vec<usize> = components.iter().map(|c| c.len()).collect();

    let (kept, sub) = if components.len() == 1 {
        ((0..n).collect::<Vec<_>>(), graph)
    } else {
        match cfg.component_policy {
            ComponentPolicy::RequireConnected => {
                return Err(Error::Data(format!(
                    "neighbourhood graph is disconnected; component sizes {component_sizes:?}"
                )));
            }
            ComponentPolicy::LargestComponent => {
                let kept = components[0].clone();
                let sub = graph.induced_subgraph(&kept);
                (kept, sub)
            }
        }
    };
    let dropped: Vec<usize> = {
        let mut in_kept = vec![false; n];
        for &i in &kept {
            in_kept[i] = true;
        }
        (0..n).filter(|&i| !in_kept[i]).collect()
    };

    let geodesics = shortest_paths(&sub);

    // One double-centered eigendecomposition serves both d selection and the
    // final coordinates, via cmds at the resolved dimension.
    let (d_used, d_auto) = match cfg.d {
        RankChoice::Fixed(d) => (d, false),
        RankChoice::Auto => {
            let probe = cmds(&geodesics, 1)?;
            let mags_idx = magnitude_order(&probe.spectrum);
            let mags: Vec<f64> = mags_idx.iter().map(|&k| probe.spectrum[k]).collect();
            let d = if mags.len() < 2 {
                1
            } else {
                select_rank(&mags, cfg.max_auto_d)?
            };
            (d, true)
        }
    };
    let out = cmds(&geodesics, d_used)?;

    let spectrum_head: Vec<f64> = {
        let idx = magnitude_order(&out.spectrum);
        idx.iter().take(128).map(|&k| out.spectrum[k]).collect()
    };

    Ok(IsomapOutput {
        points: out.points,
        kept,
        geodesics,
        diagnostics: IsomapDiagnostics {
            rule,
            component_sizes,
            dropped,
            centered_spectrum: spectrum_head,
            d_used,
            d_auto,
            positive_deficiency: out.padded,
        },
    })
}

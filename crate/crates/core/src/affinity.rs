//! Neighborhood graph construction and cluster-level affinities.

use crate::error::{Error, Result};
use crate::network::EmbeddingSet;

/// A directed edge of the neighborhood graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub other: usize,
    pub dist2: f64,
    pub weight: f64,
}

/// Directed k-nearest-neighbor graph with Gaussian edge weights
/// exp(-d^2 / sigma^2), where sigma^2 is the mean squared distance over all
/// stored neighbor pairs.
#[derive(Debug, Clone)]
pub struct AffinityGraph {
    n: usize,
    k_s: usize,
    sigma2: f64,
    out_edges: Vec<Vec<Edge>>,
    in_edges: Vec<Vec<Edge>>,
}

impl AffinityGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_s(&self) -> usize {
        self.k_s
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Outgoing edges of `m`, sorted by target index.
    pub fn out_edges(&self, m: usize) -> &[Edge] {
        &self.out_edges[m]
    }

    /// Incoming edges of `m`, sorted by source index.
    pub fn in_edges(&self, m: usize) -> &[Edge] {
        &self.in_edges[m]
    }

    /// Weight of the edge from `m` to `n`, or 0 when `n` is not a stored
    /// neighbor of `m`.
    pub fn weight(&self, m: usize, n: usize) -> f64 {
        match self.out_edges[m].binary_search_by_key(&n, |e| e.other) {
            Ok(pos) => self.out_edges[m][pos].weight,
            Err(_) => 0.0,
        }
    }

    /// All edges as (from, to, weight), sorted by (from, to).
    pub fn edge_list(&self) -> Vec<(usize, usize, f64)> {
        let mut edges = Vec::with_capacity(self.n * self.k_s);
        for (m, outs) in self.out_edges.iter().enumerate() {
            for e in outs {
                edges.push((m, e.other, e.weight));
            }
        }
        edges
    }
}

/// Build the neighborhood graph of an embedding set. Distance ties are
/// broken toward the lower point index.
pub fn build_knn_graph(x: &EmbeddingSet, k_s: usize) -> Result<AffinityGraph> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 points, got {n}")));
    }
    if k_s == 0 || k_s > n - 1 {
        return Err(Error::InvalidInput(format!(
            "k_s must be in [1, {}], got {k_s}",
            n - 1
        )));
    }

    let mut neighbors: Vec<Vec<(f64, usize)>> = Vec::with_capacity(n);
    let mut dist2_sum = 0.0;
    for m in 0..n {
        let xm = x.vector(m);
        let mut cands: Vec<(f64, usize)> = (0..n)
            .filter(|&other| other != m)
            .map(|other| {
                let d2 = xm
                    .iter()
                    .zip(x.vector(other))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                (d2, other)
            })
            .collect();
        cands.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cands.truncate(k_s);
        dist2_sum += cands.iter().map(|c| c.0).sum::<f64>();
        neighbors.push(cands);
    }

    let sigma2 = dist2_sum / (n * k_s) as f64;
    if sigma2 == 0.0 {
        return Err(Error::DegenerateEmbeddings);
    }

    let mut out_edges: Vec<Vec<Edge>> = Vec::with_capacity(n);
    let mut in_edges: Vec<Vec<Edge>> = vec![Vec::new(); n];
    for (m, cands) in neighbors.into_iter().enumerate() {
        let mut outs: Vec<Edge> = cands
            .into_iter()
            .map(|(dist2, other)| Edge { other, dist2, weight: (-dist2 / sigma2).exp() })
            .collect();
        outs.sort_unstable_by_key(|e| e.other);
        for e in &outs {
            in_edges[e.other].push(Edge { other: m, dist2: e.dist2, weight: e.weight });
        }
        out_edges.push(outs);
    }
    for ins in &mut in_edges {
        ins.sort_unstable_by_key(|e| e.other);
    }

    Ok(AffinityGraph { n, k_s, sigma2, out_edges, in_edges })
}

/// A partition of the graph vertices into contiguously numbered clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    labels: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl ClusterState {
    pub fn singletons(n: usize) -> ClusterState {
        ClusterState { labels: (0..n).collect(), members: (0..n).map(|i| vec![i]).collect() }
    }

    pub fn from_labels(labels: Vec<usize>) -> Result<ClusterState> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("label vector is empty".into()));
        }
        let n_clusters = labels.iter().max().unwrap() + 1;
        let mut members = vec![Vec::new(); n_clusters];
        for (item, &c) in labels.iter().enumerate() {
            members[c].push(item);
        }
        if let Some(empty) = members.iter().position(Vec::is_empty) {
            return Err(Error::InvalidInput(format!(
                "cluster ids are not contiguous: id {empty} has no members"
            )));
        }
        Ok(ClusterState { labels, members })
    }

    pub fn n_items(&self) -> usize {
        self.labels.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.members.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Members of cluster `c` in increasing item order.
    pub fn members(&self, c: usize) -> &[usize] {
        &self.members[c]
    }

    /// Move all members of cluster `j` into cluster `i` (`i < j`) and shift
    /// the ids above `j` down by one.
    pub fn merge(&mut self, i: usize, j: usize) -> Result<()> {
        let n_clusters = self.n_clusters();
        if i >= j || j >= n_clusters {
            return Err(Error::InvalidInput(format!(
                "merge pair ({i}, {j}) is not ordered within {n_clusters} clusters"
            )));
        }
        let moved = self.members.remove(j);
        for &item in &moved {
            self.labels[item] = i;
        }
        self.members[i].extend(moved);
        self.members[i].sort_unstable();
        for label in &mut self.labels {
            if *label > j {
                *label -= 1;
            }
        }
        Ok(())
    }
}

fn marks_for(n: usize, ci: &[usize], cj: Option<&[usize]>) -> Result<Vec<u8>> {
    let mut marks = vec![0u8; n];
    for (mark, members) in [(1u8, Some(ci)), (2u8, cj)] {
        let Some(members) = members else { continue };
        if members.is_empty() {
            return Err(Error::InvalidInput("cluster is empty".into()));
        }
        for &m in members {
            if m >= n {
                return Err(Error::InvalidInput(format!(
                    "item {m} is out of range for a graph of {n} points"
                )));
            }
            if marks[m] != 0 {
                return Err(Error::InvalidInput(format!(
                    "item {m} appears twice across the cluster pair"
                )));
            }
            marks[m] = mark;
        }
    }
    Ok(marks)
}

/// Sum over `over` of (inflow from marked set) * (outflow into marked set),
/// normalized by the squared size of the marked set.
fn directional_term(
    g: &AffinityGraph,
    marks: &[u8],
    surround_mark: u8,
    surround_size: usize,
    over: &[usize],
) -> f64 {
    let mut sum = 0.0;
    for &v in over {
        let inflow: f64 = g.in_edges[v]
            .iter()
            .filter(|e| marks[e.other] == surround_mark)
            .map(|e| e.weight)
            .sum();
        if inflow == 0.0 {
            continue;
        }
        let outflow: f64 = g.out_edges[v]
            .iter()
            .filter(|e| marks[e.other] == surround_mark)
            .map(|e| e.weight)
            .sum();
        sum += inflow * outflow;
    }
    sum / (surround_size * surround_size) as f64
}

/// Affinity between two disjoint clusters: how strongly each cluster's
/// in-neighborhood flows back out through the other.
pub fn cluster_affinity(g: &AffinityGraph, ci: &[usize], cj: &[usize]) -> Result<f64> {
    let marks = marks_for(g.n, ci, Some(cj))?;
    Ok(directional_term(g, &marks, 1, ci.len(), cj)
        + directional_term(g, &marks, 2, cj.len(), ci))
}

/// Affinity of a cluster with itself.
pub fn self_affinity(g: &AffinityGraph, ci: &[usize]) -> Result<f64> {
    let marks = marks_for(g.n, ci, None)?;
    Ok(2.0 * directional_term(g, &marks, 1, ci.len(), ci))
}

/// Mean self-affinity and mean pairwise affinity of a clustering.
pub fn intra_inter_affinity(g: &AffinityGraph, state: &ClusterState) -> Result<(f64, f64)> {
    let n_clusters = state.n_clusters();
    if n_clusters < 2 {
        return Err(Error::InterAffinityUndefined(n_clusters));
    }
    if state.n_items() != g.n {
        return Err(Error::InvalidInput(format!(
            "clustering covers {} items but the graph has {} points",
            state.n_items(),
            g.n
        )));
    }
    let mut intra = 0.0;
    for c in 0..n_clusters {
        intra += self_affinity(g, state.members(c))?;
    }
    intra /= n_clusters as f64;

    let mut inter = 0.0;
    for i in 0..n_clusters {
        for j in i + 1..n_clusters {
            inter += cluster_affinity(g, state.members(i), state.members(j))?;
        }
    }
    inter /= (n_clusters * (n_clusters - 1) / 2) as f64;
    Ok((intra, inter))
}

/// Ratio of intra- to inter-cluster affinity.
pub fn affinity_ratio(a_intra: f64, a_inter: f64) -> Result<f64> {
    if a_inter == 0.0 {
        return Err(Error::DisconnectedClustering);
    }
    Ok(a_intra / a_inter)
}

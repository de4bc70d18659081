//! Brute-force reference implementations the integration suites compare
//! against. Everything here favors being obviously correct over speed.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scenecluster::affinity::{cluster_affinity, AffinityGraph, ClusterState};
use scenecluster::matrix::Matrix;
use scenecluster::network::EmbeddingSet;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_embeddings(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> EmbeddingSet {
    let mut m = Matrix::zeros(n, dim);
    for r in 0..n {
        for c in 0..dim {
            m[(r, c)] = rng.random_range(-3.0..3.0);
        }
    }
    EmbeddingSet::new(m).unwrap()
}

/// The graph's weight matrix densified to a full square array.
pub fn dense_weights(g: &AffinityGraph) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; g.n()]; g.n()];
    for (from, to, weight) in g.edge_list() {
        w[from][to] = weight;
    }
    w
}

/// Cluster affinity computed with explicit dense products:
/// (1/|Ci|^2) 1' W_ij W_ji 1 + (1/|Cj|^2) 1' W_ji W_ij 1.
pub fn dense_cluster_affinity(w: &[Vec<f64>], ci: &[usize], cj: &[usize]) -> f64 {
    let mut first = 0.0;
    for &a in ci {
        for &a2 in ci {
            for &b in cj {
                first += w[a][b] * w[b][a2];
            }
        }
    }
    let mut second = 0.0;
    for &b in cj {
        for &b2 in cj {
            for &a in ci {
                second += w[b][a] * w[a][b2];
            }
        }
    }
    first / (ci.len() * ci.len()) as f64 + second / (cj.len() * cj.len()) as f64
}

pub fn dense_self_affinity(w: &[Vec<f64>], c: &[usize]) -> f64 {
    let mut total = 0.0;
    for &a in c {
        for &a2 in c {
            for &b in c {
                total += w[a][b] * w[b][a2];
            }
        }
    }
    2.0 * total / (c.len() * c.len()) as f64
}

/// One greedy merge step that recomputes every pairwise affinity from the
/// graph. Returns the merged pair and its affinity.
pub fn naive_best_pair(g: &AffinityGraph, state: &ClusterState) -> (usize, usize, f64) {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..state.n_clusters() {
        for j in (i + 1)..state.n_clusters() {
            let a = cluster_affinity(g, state.members(i), state.members(j)).unwrap();
            if best.is_none_or(|(_, _, b)| a > b) {
                best = Some((i, j, a));
            }
        }
    }
    best.unwrap()
}

/// Full greedy trace down to `nc_min` clusters, recomputing from scratch at
/// every step.
pub fn naive_trace(g: &AffinityGraph, nc_min: usize) -> Vec<(usize, usize, f64)> {
    let mut state = ClusterState::singletons(g.n());
    let mut records = Vec::new();
    while state.n_clusters() > nc_min {
        let (i, j, a) = naive_best_pair(g, &state);
        state.merge(i, j).unwrap();
        records.push((i, j, a));
    }
    records
}

/// Mutual information over the joint label distribution, normalized by the
/// geometric mean of the marginal entropies.
pub fn entropy_nmi(pred: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let n = pred.len() as f64;
    let k_p = pred.iter().max().unwrap() + 1;
    let k_t = truth.iter().max().unwrap() + 1;
    let mut counts = vec![vec![0usize; k_t]; k_p];
    for (&p, &t) in pred.iter().zip(truth) {
        counts[p][t] += 1;
    }
    // Probabilities as single-rounded ratios of exact integer counts, so
    // degenerate partitions come out with exactly zero entropy.
    let joint: Vec<Vec<f64>> =
        counts.iter().map(|row| row.iter().map(|&c| c as f64 / n).collect()).collect();
    let p_marg: Vec<f64> =
        counts.iter().map(|row| row.iter().sum::<usize>() as f64 / n).collect();
    let t_marg: Vec<f64> = (0..k_t)
        .map(|t| counts.iter().map(|row| row[t]).sum::<usize>() as f64 / n)
        .collect();
    let mut mutual = 0.0;
    for (p, row) in joint.iter().enumerate() {
        for (t, &v) in row.iter().enumerate() {
            if v > 0.0 {
                mutual += v * (v / (p_marg[p] * t_marg[t])).ln();
            }
        }
    }
    let h = |m: &[f64]| -> f64 {
        -m.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
    };
    let denom = (h(&p_marg) * h(&t_marg)).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    mutual / denom
}

/// Maximum assignment profit by trying every permutation; rows and columns
/// up to 7x7.
pub fn brute_force_assignment(profit: &Matrix) -> f64 {
    assert_eq!(profit.rows(), profit.cols());
    let k = profit.rows();
    assert!(k <= 7, "factorial search only sane for tiny matrices");
    let mut cols: Vec<usize> = (0..k).collect();
    let mut best = f64::NEG_INFINITY;
    permute(&mut cols, 0, &mut |perm| {
        let total: f64 = perm.iter().enumerate().map(|(r, &c)| profit[(r, c)]).sum();
        if total > best {
            best = total;
        }
    });
    best
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, k_max: usize) -> Vec<usize> {
    let k = rng.random_range(1..=k_max);
    let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    // Keep labels dense so contingency tables have no empty rows.
    let mut seen: Vec<usize> = labels.clone();
    seen.sort_unstable();
    seen.dedup();
    for l in &mut labels {
        *l = seen.binary_search(l).unwrap();
    }
    labels
}

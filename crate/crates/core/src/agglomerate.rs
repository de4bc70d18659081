//! Greedy agglomerative merging driven by cluster affinities.

use serde::{Deserialize, Serialize};

use crate::affinity::{cluster_affinity, self_affinity, AffinityGraph, ClusterState};
use crate::error::{Error, Result};

/// One executed merge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    /// 1-based merge index.
    pub timestep: usize,
    /// Cluster ids that were merged, `pair.0 < pair.1`, in pre-merge numbering.
    pub pair: (usize, usize),
    pub affinity: f64,
    /// Loss contributed by this merge, the negated affinity.
    pub step_loss: f64,
    /// Cluster count after the merge.
    pub n_clusters: usize,
}

pub fn init_clusters(n: usize) -> Result<ClusterState> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 items to cluster, got {n}")));
    }
    Ok(ClusterState::singletons(n))
}

/// Pairwise and self affinities of the current clustering, kept in sync
/// across merges by recomputing only the rows a merge touches.
#[derive(Debug, Clone)]
pub struct AffinityCache {
    pair: Vec<Vec<f64>>,
    self_aff: Vec<f64>,
}

impl AffinityCache {
    pub fn new(g: &AffinityGraph, state: &ClusterState) -> Result<AffinityCache> {
        let n_clusters = state.n_clusters();
        let mut pair = vec![vec![0.0; n_clusters]; n_clusters];
        for i in 0..n_clusters {
            for j in i + 1..n_clusters {
                let a = cluster_affinity(g, state.members(i), state.members(j))?;
                pair[i][j] = a;
                pair[j][i] = a;
            }
        }
        let self_aff = (0..n_clusters)
            .map(|c| self_affinity(g, state.members(c)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(AffinityCache { pair, self_aff })
    }

    pub fn n_clusters(&self) -> usize {
        self.self_aff.len()
    }

    pub fn pair_affinity(&self, i: usize, j: usize) -> f64 {
        self.pair[i][j]
    }

    pub fn self_affinity(&self, i: usize) -> f64 {
        self.self_aff[i]
    }

    /// The pair with the highest affinity; ties resolve to the
    /// lexicographically smallest pair regardless of scan order.
    pub fn best_pair(&self) -> Option<(usize, usize, f64)> {
        let n = self.n_clusters();
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            for j in i + 1..n {
                let a = self.pair[i][j];
                let better = match best {
                    None => true,
                    Some((bi, bj, ba)) => a > ba || (a == ba && (i, j) < (bi, bj)),
                };
                if better {
                    best = Some((i, j, a));
                }
            }
        }
        best
    }

    /// Mean self-affinity and mean pairwise affinity over the cached values.
    pub fn intra_inter(&self) -> Result<(f64, f64)> {
        let n = self.n_clusters();
        if n < 2 {
            return Err(Error::InterAffinityUndefined(n));
        }
        let intra = self.self_aff.iter().sum::<f64>() / n as f64;
        let mut inter = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                inter += self.pair[i][j];
            }
        }
        inter /= (n * (n - 1) / 2) as f64;
        Ok((intra, inter))
    }

    /// Refresh the cache after cluster `j` was merged into cluster `i`.
    /// `state` must already reflect the merge.
    fn apply_merge(
        &mut self,
        g: &AffinityGraph,
        state: &ClusterState,
        i: usize,
        j: usize,
    ) -> Result<()> {
        self.pair.remove(j);
        for row in &mut self.pair {
            row.remove(j);
        }
        self.self_aff.remove(j);

        self.self_aff[i] = self_affinity(g, state.members(i))?;
        for k in 0..state.n_clusters() {
            if k == i {
                continue;
            }
            let a = cluster_affinity(g, state.members(i), state.members(k))?;
            self.pair[i][k] = a;
            self.pair[k][i] = a;
        }
        Ok(())
    }
}

/// Runs greedy merges over a fixed neighborhood graph.
#[derive(Debug)]
pub struct MergeEngine<'g> {
    g: &'g AffinityGraph,
    state: ClusterState,
    cache: AffinityCache,
    next_timestep: usize,
}

impl<'g> MergeEngine<'g> {
    pub fn new(
        g: &'g AffinityGraph,
        state: ClusterState,
        start_timestep: usize,
    ) -> Result<MergeEngine<'g>> {
        if state.n_items() != g.n() {
            return Err(Error::InvalidInput(format!(
                "clustering covers {} items but the graph has {} points",
                state.n_items(),
                g.n()
            )));
        }
        let cache = AffinityCache::new(g, &state)?;
        Ok(MergeEngine { g, state, cache, next_timestep: start_timestep })
    }

    pub fn state(&self) -> &ClusterState {
        &self.state
    }

    pub fn into_state(self) -> ClusterState {
        self.state
    }

    pub fn n_clusters(&self) -> usize {
        self.state.n_clusters()
    }

    pub fn cache(&self) -> &AffinityCache {
        &self.cache
    }

    pub fn intra_inter(&self) -> Result<(f64, f64)> {
        self.cache.intra_inter()
    }

    /// Merge the best pair and return its record.
    pub fn step(&mut self) -> Result<MergeRecord> {
        let (i, j, affinity) = self
            .cache
            .best_pair()
            .ok_or_else(|| Error::InvalidInput("nothing left to merge".into()))?;
        self.state.merge(i, j)?;
        self.cache.apply_merge(self.g, &self.state, i, j)?;
        let record = MergeRecord {
            timestep: self.next_timestep,
            pair: (i, j),
            affinity,
            step_loss: -affinity,
            n_clusters: self.state.n_clusters(),
        };
        self.next_timestep += 1;
        Ok(record)
    }
}

/// Run `n_merges` greedy merges starting from `state`.
pub fn run_merge_phase(
    g: &AffinityGraph,
    state: ClusterState,
    n_merges: usize,
    start_timestep: usize,
) -> Result<(ClusterState, Vec<MergeRecord>)> {
    if n_merges + 1 > state.n_clusters() {
        return Err(Error::InvalidInput(format!(
            "{} merges requested but only {} clusters exist",
            n_merges,
            state.n_clusters()
        )));
    }
    let mut engine = MergeEngine::new(g, state, start_timestep)?;
    let mut records = Vec::with_capacity(n_merges);
    for _ in 0..n_merges {
        records.push(engine.step()?);
    }
    Ok((engine.into_state(), records))
}

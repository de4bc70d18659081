//! Alternating optimization: train the encoder on the current pseudo-labels,
//! rebuild the neighborhood graph in embedding space, run a bounded burst of
//! merges, and afterwards pick the cluster count whose affinity ratio peaked.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::affinity::build_knn_graph;
use crate::agglomerate::{init_clusters, MergeEngine};
use crate::error::{Error, Result};
use crate::features::LmsFeature;
use crate::network::{
    extract_embeddings, init_network, prepare_dataset, train_epochs, EmbeddingSet,
    NetworkConfig, NetworkParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointConfig {
    /// Neighbor count of the embedding graph.
    pub k_s: usize,
    /// Smallest cluster count considered, at least 2.
    pub nc_min: usize,
    /// Largest cluster count considered.
    pub nc_max: usize,
    /// Merges executed per network update.
    pub unrolled_steps: usize,
    /// Training epochs per network update.
    pub epochs_per_update: usize,
    pub network: NetworkConfig,
    pub seed: u64,
}

impl Default for JointConfig {
    fn default() -> JointConfig {
        JointConfig {
            k_s: 5,
            nc_min: 2,
            nc_max: 10,
            unrolled_steps: 10,
            epochs_per_update: 2,
            network: NetworkConfig::default(),
            seed: 0,
        }
    }
}

/// One merge with the clustering statistics taken right after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub timestep: usize,
    /// Network update phase this merge ran under; 0 when features are fixed.
    pub update: usize,
    pub pair: (usize, usize),
    pub affinity: f64,
    pub step_loss: f64,
    pub cumulative_loss: f64,
    pub n_clusters: usize,
    pub a_intra: f64,
    pub a_inter: f64,
    /// Intra/inter affinity ratio; absent when the clustering is disconnected.
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateEntry {
    pub update: usize,
    /// Pseudo-class count the head was trained against.
    pub n_classes: usize,
    pub mean_loss: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunTrace {
    pub merges: Vec<TraceEntry>,
    pub updates: Vec<UpdateEntry>,
    /// Labels recorded when the run first reached each cluster count inside
    /// the search interval.
    pub snapshots: BTreeMap<usize, Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct ClusteringResult {
    pub n_clusters: usize,
    pub labels: Vec<usize>,
    /// Affinity ratio at the selected timestep.
    pub gamma: f64,
    pub selected_timestep: usize,
    /// Embeddings from the update phase that produced the selected count.
    pub embeddings: EmbeddingSet,
    /// Network state behind those embeddings; absent for fixed-feature runs.
    pub params: Option<NetworkParams>,
    pub trace: RunTrace,
}

fn validate(cfg: &JointConfig, n_items: usize) -> Result<()> {
    if cfg.nc_min < 2 {
        return Err(Error::InvalidInput(format!("nc_min must be at least 2, got {}", cfg.nc_min)));
    }
    if cfg.nc_min > cfg.nc_max {
        return Err(Error::InvalidInput(format!(
            "empty cluster-count interval [{}, {}]",
            cfg.nc_min, cfg.nc_max
        )));
    }
    if n_items <= cfg.nc_max {
        return Err(Error::InvalidInput(format!(
            "need more than nc_max = {} items, got {n_items}",
            cfg.nc_max
        )));
    }
    if cfg.k_s == 0 || cfg.k_s >= n_items {
        return Err(Error::InvalidInput(format!(
            "k_s must be in [1, {}], got {}",
            n_items - 1,
            cfg.k_s
        )));
    }
    if cfg.unrolled_steps == 0 {
        return Err(Error::InvalidInput("unrolled_steps must be at least 1".into()));
    }
    if cfg.epochs_per_update == 0 {
        return Err(Error::InvalidInput("epochs_per_update must be at least 1".into()));
    }
    Ok(())
}

/// The affinity-ratio peak inside the interval: returns (cluster count,
/// timestep). Equal ratios resolve to the earlier timestep, i.e. the larger
/// cluster count.
pub fn check_convergence(trace: &RunTrace, nc_min: usize, nc_max: usize) -> Result<(usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for e in &trace.merges {
        if e.n_clusters < nc_min || e.n_clusters > nc_max {
            continue;
        }
        let Some(gamma) = e.gamma else { continue };
        if best.is_none_or(|(bg, _, _)| gamma > bg) {
            best = Some((gamma, e.timestep, e.n_clusters));
        }
    }
    best.map(|(_, t, c)| (c, t))
        .ok_or(Error::NoConvergencePoint { nc_min, nc_max })
}

/// Run one burst of merges, recording trace entries and snapshots.
/// Returns whether any merge landed inside the search interval.
fn merge_burst(
    engine: &mut MergeEngine,
    n_merges: usize,
    update: usize,
    cfg: &JointConfig,
    trace: &mut RunTrace,
    cumulative: &mut f64,
) -> Result<bool> {
    let mut recorded = false;
    for _ in 0..n_merges {
        let rec = engine.step()?;
        let (a_intra, a_inter) = engine.intra_inter()?;
        let gamma = if a_inter > 0.0 { Some(a_intra / a_inter) } else { None };
        *cumulative += rec.step_loss;
        if (cfg.nc_min..=cfg.nc_max).contains(&rec.n_clusters) {
            trace.snapshots.insert(rec.n_clusters, engine.state().labels().to_vec());
            recorded = true;
        }
        trace.merges.push(TraceEntry {
            timestep: rec.timestep,
            update,
            pair: rec.pair,
            affinity: rec.affinity,
            step_loss: rec.step_loss,
            cumulative_loss: *cumulative,
            n_clusters: rec.n_clusters,
            a_intra,
            a_inter,
            gamma,
        });
    }
    Ok(recorded)
}

fn gamma_at(trace: &RunTrace, timestep: usize) -> f64 {
    trace
        .merges
        .iter()
        .find(|e| e.timestep == timestep)
        .and_then(|e| e.gamma)
        .expect("selected timestep must carry a defined ratio")
}

/// Jointly learn embeddings and a clustering of the given features.
pub fn run(features: &[LmsFeature], cfg: &JointConfig) -> Result<ClusteringResult> {
    validate(cfg, features.len())?;
    let n_items = features.len();

    let mut net_cfg = cfg.network.clone();
    net_cfg.seed = cfg.seed;
    net_cfg.n_output_classes = n_items;
    let tensors = prepare_dataset(features, &net_cfg)?;
    let mut params = init_network(&net_cfg)?;

    let mut state = init_clusters(n_items)?;
    let mut trace = RunTrace::default();
    let mut cumulative = 0.0;
    let mut next_timestep = 1;
    let mut epoch_base = 0;
    let mut update = 0;
    // Parameters of every phase that produced an in-interval count, so the
    // embeddings behind the selected clustering can be reproduced.
    let mut params_by_update: BTreeMap<usize, NetworkParams> = BTreeMap::new();
    let mut count_to_update: BTreeMap<usize, usize> = BTreeMap::new();

    while state.n_clusters() > cfg.nc_min {
        update += 1;
        if params.head_width() != state.n_clusters() {
            let head_seed =
                cfg.seed ^ (update as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            params.re_head(state.n_clusters(), head_seed)?;
        }
        let outcome = train_epochs(
            &mut params,
            &tensors,
            state.labels(),
            &net_cfg,
            cfg.epochs_per_update,
            epoch_base,
        )?;
        epoch_base += cfg.epochs_per_update;
        trace.updates.push(UpdateEntry {
            update,
            n_classes: state.n_clusters(),
            mean_loss: outcome.mean_loss,
            iterations: outcome.iterations,
        });

        let embeddings = extract_embeddings(&params, &tensors)?;
        let graph = build_knn_graph(&embeddings, cfg.k_s)?;
        let mut engine = MergeEngine::new(&graph, state, next_timestep)?;
        let n_merges = cfg.unrolled_steps.min(engine.n_clusters() - cfg.nc_min);
        let recorded = merge_burst(&mut engine, n_merges, update, cfg, &mut trace, &mut cumulative)?;
        next_timestep += n_merges;
        state = engine.into_state();
        if recorded {
            for count in state.n_clusters()..=cfg.nc_max {
                if trace.snapshots.contains_key(&count) {
                    count_to_update.entry(count).or_insert(update);
                }
            }
            params_by_update.insert(update, params.clone());
        }
    }

    let (n_star, timestep) = check_convergence(&trace, cfg.nc_min, cfg.nc_max)?;
    let labels = trace.snapshots[&n_star].clone();
    let chosen_update = count_to_update[&n_star];
    let chosen_params = params_by_update.remove(&chosen_update).unwrap();
    let embeddings = extract_embeddings(&chosen_params, &tensors)?;
    let gamma = gamma_at(&trace, timestep);
    Ok(ClusteringResult {
        n_clusters: n_star,
        labels,
        gamma,
        selected_timestep: timestep,
        embeddings,
        params: Some(chosen_params),
        trace,
    })
}

/// Agglomerate precomputed embeddings without any network updates.
pub fn run_fixed_features(x: &EmbeddingSet, cfg: &JointConfig) -> Result<ClusteringResult> {
    validate(cfg, x.len())?;
    let graph = build_knn_graph(x, cfg.k_s)?;
    let mut engine = MergeEngine::new(&graph, init_clusters(x.len())?, 1)?;
    let mut trace = RunTrace::default();
    let mut cumulative = 0.0;
    let n_merges = engine.n_clusters() - cfg.nc_min;
    merge_burst(&mut engine, n_merges, 0, cfg, &mut trace, &mut cumulative)?;

    let (n_star, timestep) = check_convergence(&trace, cfg.nc_min, cfg.nc_max)?;
    let labels = trace.snapshots[&n_star].clone();
    let gamma = gamma_at(&trace, timestep);
    Ok(ClusteringResult {
        n_clusters: n_star,
        labels,
        gamma,
        selected_timestep: timestep,
        embeddings: x.clone(),
        params: None,
        trace,
    })
}

//! Acceptance gate for the whole pipeline. Every test prints one PASS line
//! with its measured runtime so a full run reads as a checklist.

mod common;

use std::time::{Duration, Instant};

use common::{
    brute_force_assignment, dense_cluster_affinity, dense_weights, entropy_nmi, naive_trace,
    random_embeddings, random_labels, rng,
};
use rand::Rng;
use scenecluster::affinity::{build_knn_graph, cluster_affinity, ClusterState};
use scenecluster::agglomerate::{init_clusters, MergeEngine};
use scenecluster::config::desk_profile;
use scenecluster::features::extract_lms;
use scenecluster::joint::{run, run_fixed_features, JointConfig};
use scenecluster::matrix::Matrix;
use scenecluster::metrics::{clustering_accuracy, hungarian, nmi};
use scenecluster::network::{
    gradient_check, init_network, ConvSpec, EmbeddingSet, NetworkConfig, Tensor,
};
use scenecluster::synth::{subsample_imbalanced, synth_blobs, synth_scenes, BlobSpec, SceneSpec};

fn finish(name: &str, detail: &str, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    println!("PASS {name}: {detail} in {elapsed:.2?} (budget {budget:?})");
    assert!(elapsed <= budget, "{name} took {elapsed:?}, budget is {budget:?}");
}

fn random_partition(r: &mut rand_chacha::ChaCha8Rng, n: usize, k: usize) -> ClusterState {
    loop {
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let mut seen = labels.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() < 2 {
            continue;
        }
        let dense: Vec<usize> = labels.iter().map(|l| seen.binary_search(l).unwrap()).collect();
        return ClusterState::from_labels(dense).unwrap();
    }
}

#[test]
fn affinity_matches_dense_oracle() {
    let started = Instant::now();
    let mut r = rng(101);
    for case in 0..100 {
        let n = r.random_range(4..=20);
        let dim = r.random_range(1..=4);
        let k_s = r.random_range(1..=5.min(n - 1));
        let x = random_embeddings(&mut r, n, dim);
        let g = build_knn_graph(&x, k_s).unwrap();
        let w = dense_weights(&g);
        let n_parts = r.random_range(2..=4);
        let state = random_partition(&mut r, n, n_parts);
        for i in 0..state.n_clusters() {
            for j in (i + 1)..state.n_clusters() {
                let got = cluster_affinity(&g, state.members(i), state.members(j)).unwrap();
                let want = dense_cluster_affinity(&w, state.members(i), state.members(j));
                assert!(
                    (got - want).abs() < 1e-10,
                    "case {case} pair ({i},{j}): sparse {got} vs dense {want}"
                );
            }
        }
    }
    finish(
        "affinity-oracle",
        "100 random instances match the dense product within 1e-10",
        started,
        Duration::from_secs(10),
    );
}

#[test]
fn merge_trace_matches_naive_engine() {
    let started = Instant::now();
    let mut r = rng(102);
    for case in 0..50 {
        let n = r.random_range(4..=10);
        let dim = r.random_range(1..=3);
        let k_s = r.random_range(1..=(n - 1).min(4));
        let x = random_embeddings(&mut r, n, dim);
        let g = build_knn_graph(&x, k_s).unwrap();
        let want = naive_trace(&g, 1);
        let mut engine = MergeEngine::new(&g, init_clusters(n).unwrap(), 1).unwrap();
        for (step, &(wi, wj, wa)) in want.iter().enumerate() {
            let rec = engine.step().unwrap();
            assert_eq!(rec.pair, (wi, wj), "case {case} step {step}: different pair");
            assert_eq!(
                rec.affinity.to_bits(),
                wa.to_bits(),
                "case {case} step {step}: affinity drifted"
            );
        }
    }
    finish(
        "greedy-trace",
        "50 cached traces equal the recompute-from-scratch engine exactly",
        started,
        Duration::from_secs(30),
    );
}

#[test]
fn metrics_match_reference_implementations() {
    fn exhaustive_best_perm(profit: &Matrix) -> Vec<usize> {
        fn visit(items: &mut Vec<usize>, k: usize, profit: &Matrix, best: &mut (f64, Vec<usize>)) {
            if k == items.len() {
                let total: f64 =
                    items.iter().enumerate().map(|(r, &c)| profit[(r, c)]).sum();
                if total > best.0 {
                    *best = (total, items.clone());
                }
                return;
            }
            for i in k..items.len() {
                items.swap(k, i);
                visit(items, k + 1, profit, best);
                items.swap(k, i);
            }
        }
        let mut cols: Vec<usize> = (0..profit.rows()).collect();
        let mut best = (f64::NEG_INFINITY, Vec::new());
        visit(&mut cols, 0, profit, &mut best);
        best.1
    }

    let started = Instant::now();
    let mut r = rng(103);
    for case in 0..1000 {
        let n = r.random_range(2..=50);
        let pred = random_labels(&mut r, n, 6);
        let truth = random_labels(&mut r, n, 6);
        let got = nmi(&pred, &truth).unwrap();
        let want = entropy_nmi(&pred, &truth);
        assert!((got - want).abs() < 1e-12, "case {case}: nmi {got} vs oracle {want}");
    }
    for case in 0..200 {
        let k = r.random_range(1..=7);
        let mut profit = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                profit[(i, j)] = r.random_range(0.0..20.0);
            }
        }
        let got = hungarian(&profit).unwrap();
        assert_eq!(got, exhaustive_best_perm(&profit), "case {case}: different assignment");
        let total: f64 = got.iter().enumerate().map(|(i, &j)| profit[(i, j)]).sum();
        assert!((total - brute_force_assignment(&profit)).abs() < 1e-9);
    }
    for case in 0..200 {
        let n = r.random_range(4..=50);
        let pred = random_labels(&mut r, n, 6);
        let truth = random_labels(&mut r, n, 6);
        let k = pred.iter().max().unwrap() + 1;
        let mut perm: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let relabeled: Vec<usize> = pred.iter().map(|&p| perm[p]).collect();
        let a = clustering_accuracy(&pred, &truth).unwrap();
        let b = clustering_accuracy(&relabeled, &truth).unwrap();
        assert_eq!(a.to_bits(), b.to_bits(), "case {case}: accuracy moved under relabeling");
    }
    finish(
        "metrics-oracles",
        "1000 nmi + 200 assignment + 200 relabeling checks hold",
        started,
        Duration::from_secs(30),
    );
}

#[test]
fn backprop_gradients_match_finite_differences() {
    let started = Instant::now();
    for seed in 0..10u64 {
        let cfg = NetworkConfig {
            input_shape: (1, 12, 12),
            conv_layers: vec![ConvSpec { kernel: 3, out_channels: 3, stride: 1 }],
            fc_sizes: vec![10, 8],
            n_output_classes: 4,
            learning_rate: 0.05,
            weight_decay: 0.01,
            batch_size: 4,
            max_iterations: 1_000_000,
            seed,
        };
        let params = init_network(&cfg).unwrap();
        assert!(params.param_count() <= 5000, "network too large for the check");
        let mut r = rng(300 + seed);
        let (c, h, w) = cfg.input_shape;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..6 {
            let mut t = Tensor::zeros(c, h, w);
            for v in &mut t.data {
                *v = r.random_range(-1.0..1.0);
            }
            data.push(t);
            labels.push(r.random_range(0..cfg.n_output_classes));
        }
        let worst =
            gradient_check(&params, &data, &labels, cfg.weight_decay, 60, 400 + seed).unwrap();
        assert!(worst < 1e-4, "seed {seed}: worst relative error {worst}");
    }
    finish(
        "gradient-check",
        "10 seeds under 1e-4 relative error on a <=5k parameter network",
        started,
        Duration::from_secs(60),
    );
}

fn planted_blobs(seed: u64) -> (Matrix, Vec<usize>) {
    synth_blobs(&BlobSpec {
        n_clusters: 5,
        per_cluster: 40,
        dim: 16,
        separation: 10.0,
        seed,
    })
    .unwrap()
}

fn fixed_cfg(k_s: usize, nc_min: usize, nc_max: usize) -> JointConfig {
    JointConfig { k_s, nc_min, nc_max, ..JointConfig::default() }
}

#[test]
fn planted_blob_count_recovery() {
    let started = Instant::now();

    let mut hits = 0;
    for seed in 1..=10 {
        let (features, truth) = planted_blobs(seed);
        let x = EmbeddingSet::new(features).unwrap();
        let result = run_fixed_features(&x, &fixed_cfg(50, 2, 10)).unwrap();
        let score = nmi(&result.labels, &truth).unwrap();
        if result.n_clusters == 5 && score >= 0.95 {
            hits += 1;
        }
    }
    assert!(hits >= 9, "recovered the planted count in only {hits} of 10 seeds");

    let (features, _) = planted_blobs(2);
    let x = EmbeddingSet::new(features).unwrap();
    let mut selected = Vec::new();
    for k_s in [2, 5, 10, 25, 40] {
        selected.push(run_fixed_features(&x, &fixed_cfg(k_s, 2, 10)).unwrap().n_clusters);
    }
    let mut distinct = selected.clone();
    distinct.sort_unstable();
    distinct.dedup();
    assert!(
        distinct.len() >= 2,
        "selected count never moved across the neighbor sweep: {selected:?}"
    );

    let (features, truth) = planted_blobs(1);
    let x = EmbeddingSet::new(features).unwrap();
    let mut curve = Vec::new();
    for count in 2..=10 {
        let result = run_fixed_features(&x, &fixed_cfg(50, count, count)).unwrap();
        assert_eq!(result.n_clusters, count);
        curve.push((
            nmi(&result.labels, &truth).unwrap(),
            clustering_accuracy(&result.labels, &truth).unwrap(),
        ));
    }
    let planted = 3;
    for side in 0..2 {
        let score = |c: &(f64, f64)| if side == 0 { c.0 } else { c.1 };
        for i in 0..planted {
            assert!(
                score(&curve[i]) < score(&curve[i + 1]),
                "score did not rise toward the planted count: {curve:?}"
            );
        }
        for i in planted..curve.len() - 1 {
            assert!(
                score(&curve[i]) > score(&curve[i + 1]),
                "score did not fall past the planted count: {curve:?}"
            );
        }
    }

    finish(
        "count-recovery",
        &format!(
            "{hits}/10 seeds at the planted count, sweep selections {selected:?}, \
             scores peak at the planted count"
        ),
        started,
        Duration::from_secs(120),
    );
}

#[test]
fn joint_training_recovers_scene_classes() {
    let started = Instant::now();
    let lms_cfg = desk_profile().lms;
    let mut passes = 0;
    let mut detail = Vec::new();
    for seed in 1..=10u64 {
        let items = synth_scenes(&SceneSpec { seed, ..SceneSpec::default() }).unwrap();
        let truth: Vec<usize> = items.iter().map(|i| i.label).collect();
        let features: Vec<_> =
            items.iter().map(|i| extract_lms(&i.signal, &lms_cfg).unwrap()).collect();

        let mut jc = JointConfig { k_s: 30, nc_min: 3, seed, ..JointConfig::default() };
        jc.network.input_shape = (1, 64, 48);
        assert_eq!(jc.unrolled_steps, 10);

        let result = run(&features, &jc).unwrap();
        let score = nmi(&result.labels, &truth).unwrap();
        let updates = &result.trace.updates;
        assert!(updates.len() >= 3, "seed {seed}: only {} network updates", updates.len());
        let decreasing = updates[0].mean_loss > updates[1].mean_loss
            && updates[1].mean_loss > updates[2].mean_loss;
        if score >= 0.8 && decreasing {
            passes += 1;
        }
        detail.push(format!("{}:{score:.2}", result.n_clusters));
    }
    assert!(passes >= 7, "only {passes}/10 seeds passed: {detail:?}");
    finish(
        "joint-loop",
        &format!("{passes}/10 seeds reach nmi >= 0.8 with decreasing loss [{}]", detail.join(" ")),
        started,
        Duration::from_secs(600),
    );
}

#[test]
fn recovery_survives_imbalanced_classes() {
    let started = Instant::now();
    let (features, truth) = planted_blobs(1);
    let x = EmbeddingSet::new(features.clone()).unwrap();
    let balanced = run_fixed_features(&x, &fixed_cfg(50, 2, 10)).unwrap();
    let balanced_nmi = nmi(&balanced.labels, &truth).unwrap();
    assert_eq!(balanced.n_clusters, 5);

    let mut correct = 0;
    let mut scores = Vec::new();
    for ordering in 1..=10u64 {
        let keep = subsample_imbalanced(&truth, 0.1, ordering).unwrap();
        let rows: Vec<Vec<f64>> =
            keep.iter().map(|&i| features.row(i).to_vec()).collect();
        let sub_truth: Vec<usize> = keep.iter().map(|&i| truth[i]).collect();
        let sub = EmbeddingSet::new(Matrix::from_rows(&rows).unwrap()).unwrap();
        let result = run_fixed_features(&sub, &fixed_cfg(15, 2, 10)).unwrap();
        if result.n_clusters == 5 {
            correct += 1;
        }
        scores.push(nmi(&result.labels, &sub_truth).unwrap());
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    assert!(correct >= 5, "correct count in only {correct}/10 orderings");
    assert!(
        (balanced_nmi - mean).abs() <= 0.15,
        "mean nmi {mean:.3} drifted more than 0.15 from balanced {balanced_nmi:.3}"
    );
    finish(
        "imbalanced-robustness",
        &format!("{correct}/10 orderings correct, mean nmi {mean:.3} vs balanced {balanced_nmi:.3}"),
        started,
        Duration::from_secs(180),
    );
}

#[test]
fn pipeline_stages_are_byte_deterministic() {
    use std::collections::BTreeMap;
    use std::path::Path;
    use std::process::Command;

    fn bin() -> &'static str {
        env!("CARGO_BIN_EXE_scenecluster")
    }

    fn run_ok(args: &[&str]) -> Vec<u8> {
        let out = Command::new(bin()).args(args).output().unwrap();
        assert!(
            out.status.success(),
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    }

    fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
        let mut map = BTreeMap::new();
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            assert!(path.is_file(), "unexpected subdirectory {}", path.display());
            map.insert(
                path.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&path).unwrap(),
            );
        }
        map
    }

    let started = Instant::now();
    let root = tempfile::tempdir().unwrap();
    let config_path = root.path().join("config.json");
    let mut cfg = desk_profile();
    cfg.joint.k_s = 4;
    cfg.joint.network.input_shape = (1, 64, 16);
    std::fs::write(&config_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();

    let mut stages: Vec<BTreeMap<String, Vec<u8>>> = Vec::new();
    for pass in 0..2 {
        let base = root.path().join(format!("pass-{pass}"));
        let wav = base.join("wav");
        let feat = base.join("feat");
        let run_dir = base.join("run");
        let as_str = |p: &Path| p.to_str().unwrap().to_owned();

        run_ok(&[
            "synth-scenes",
            "--classes", "3",
            "--per-class", "4",
            "--seed", "9",
            "--out", &as_str(&wav),
        ]);
        run_ok(&["extract", "--wav-dir", &as_str(&wav), "--out", &as_str(&feat)]);
        run_ok(&[
            "cluster",
            "--manifest", &as_str(&feat.join("manifest.json")),
            "--config", config_path.to_str().unwrap(),
            "--unrolled-steps", "4",
            "--seed", "5",
            "--out", &as_str(&run_dir),
        ]);
        let report = run_ok(&[
            "evaluate",
            "--true-labels", &as_str(&wav.join("labels.csv")),
            "--pred-labels", &as_str(&run_dir.join("labels.csv")),
        ]);

        let mut all = dir_bytes(&wav);
        all.extend(dir_bytes(&feat).into_iter().map(|(k, v)| (format!("feat/{k}"), v)));
        all.extend(dir_bytes(&run_dir).into_iter().map(|(k, v)| (format!("run/{k}"), v)));
        all.insert("evaluate.stdout".into(), report);
        stages.push(all);
    }

    let (a, b) = (&stages[0], &stages[1]);
    assert_eq!(
        a.keys().collect::<Vec<_>>(),
        b.keys().collect::<Vec<_>>(),
        "the two passes produced different files"
    );
    for (name, bytes) in a {
        assert_eq!(bytes, &b[name], "{name} differs between same-seed runs");
    }
    finish(
        "determinism",
        &format!("{} files byte-identical across same-seed pipeline reruns", a.len()),
        started,
        Duration::from_secs(300),
    );
}

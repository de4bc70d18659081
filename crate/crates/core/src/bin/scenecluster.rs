//! Command-line front end: synthetic data generation, feature extraction,
//! clustering runs, and scoring.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use scenecluster::config::load_run_config;
use scenecluster::dataset::{
    load_feature_dataset, load_matrix_dataset, read_labels_csv, read_matrix_csv,
    write_labels_csv, write_matrix_csv, write_lms, FailureItem, Manifest, ManifestItem,
    Provenance,
};
use scenecluster::error::{Error, Result};
use scenecluster::features::wav::{read_wav, write_wav};
use scenecluster::features::{extract_lms, LmsFeature};
use scenecluster::joint::{run, run_fixed_features, ClusteringResult, JointConfig, UpdateEntry};
use scenecluster::metrics::{clustering_accuracy, nmi};
use scenecluster::network::params_io::save_params;
use scenecluster::network::EmbeddingSet;
use scenecluster::synth::{subsample_imbalanced, synth_blobs, synth_scenes, BlobSpec, SceneSpec};
use scenecluster::Matrix;

#[derive(Parser)]
#[command(name = "scenecluster", version, about = "Joint embedding learning and agglomerative clustering for audio scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract log mel spectrum features from a directory of WAV files.
    Extract(ExtractArgs),
    /// Generate Gaussian feature blobs with planted labels.
    SynthBlobs(SynthBlobsArgs),
    /// Generate labeled synthetic audio scenes as WAV files.
    SynthScenes(SynthScenesArgs),
    /// Thin out a labeled dataset with linearly ramped class retention.
    Subsample(SubsampleArgs),
    /// Cluster a dataset, training the network or using features as given.
    Cluster(ClusterArgs),
    /// Score predicted labels against reference labels.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Directory scanned (non-recursively) for .wav files.
    #[arg(long)]
    wav_dir: PathBuf,
    /// Output directory for feature files and the manifest.
    #[arg(long)]
    out: PathBuf,
    /// Built-in profile name (desk, paper) or path to a config JSON.
    #[arg(long, default_value = "desk")]
    config: String,
}

#[derive(Args)]
struct SynthBlobsArgs {
    #[arg(long)]
    clusters: usize,
    #[arg(long)]
    per_cluster: usize,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthScenesArgs {
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SubsampleArgs {
    /// Manifest of the labeled dataset to thin out.
    #[arg(long)]
    manifest: PathBuf,
    /// Retention rate of the smallest class, in (0, 1].
    #[arg(long)]
    r_min: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    /// Manifest of a feature dataset (per-item features or a shared matrix).
    #[arg(long, conflicts_with = "features")]
    manifest: Option<PathBuf>,
    /// Bare feature matrix CSV, one vector per row.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Built-in profile name (desk, paper) or path to a config JSON.
    #[arg(long, default_value = "desk")]
    config: String,
    /// Neighbor counts to run; several values produce one directory each
    /// plus a summary CSV.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long)]
    nc_min: Option<usize>,
    #[arg(long)]
    nc_max: Option<usize>,
    #[arg(long)]
    unrolled_steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cluster the given vectors directly instead of training the network.
    #[arg(long)]
    fixed_features: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Reference labels CSV (id,label).
    #[arg(long)]
    true_labels: PathBuf,
    /// Predicted labels CSV (id,label).
    #[arg(long)]
    pred_labels: PathBuf,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::DegenerateEmbeddings => "degenerate_embeddings",
        Error::InterAffinityUndefined(_) => "inter_affinity_undefined",
        Error::DisconnectedClustering => "disconnected_clustering",
        Error::NoConvergencePoint { .. } => "no_convergence_point",
        Error::Divergence { .. } => "divergence",
        Error::CorruptParams { .. } => "corrupt_params",
        Error::ParamsVersion { .. } => "params_version",
        Error::Wav { .. } => "wav",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
        Error::Csv { .. } => "csv",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Extract(args) => cmd_extract(&args),
        Command::SynthBlobs(args) => cmd_synth_blobs(&args),
        Command::SynthScenes(args) => cmd_synth_scenes(&args),
        Command::Subsample(args) => cmd_subsample(&args),
        Command::Cluster(args) => cmd_cluster(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let report = serde_json::json!({ "error": e.to_string(), "kind": error_kind(&e) });
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}

fn item_id(i: usize) -> String {
    format!("item-{i:04}")
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let is_wav = path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("wav"));
        if path.is_file() && is_wav {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn cmd_extract(args: &ExtractArgs) -> Result<ExitCode> {
    let cfg = load_run_config(&args.config)?;
    let files = wav_files(&args.wav_dir)?;
    fs::create_dir_all(&args.out)?;
    if files.is_empty() {
        eprintln!("warning: no .wav files in {}", args.wav_dir.display());
    }

    let results: Vec<(String, std::result::Result<String, String>)> = files
        .par_iter()
        .map(|path| {
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let written = read_wav(path)
                .and_then(|signal| {
                    let feature = extract_lms(&signal, &cfg.lms)?;
                    write_lms(&args.out, &id, &feature, signal.sample_rate)
                })
                .map_err(|e| e.to_string());
            (id, written)
        })
        .collect();

    let mut seen = std::collections::BTreeSet::new();
    let mut items = Vec::new();
    let mut failures = Vec::new();
    for (id, written) in results {
        if !seen.insert(id.clone()) {
            failures.push(FailureItem { id, error: "duplicate id".into() });
            continue;
        }
        match written {
            Ok(name) => items.push(ManifestItem { id, path: Some(name), row: None, label: None }),
            Err(error) => failures.push(FailureItem { id, error }),
        }
    }

    let n_failed = failures.len();
    let n_total = items.len() + n_failed;
    let manifest = Manifest { provenance: Provenance::Wav, features_matrix: None, items, failures };
    manifest.save(&args.out.join("manifest.json"))?;
    if n_failed > 0 {
        eprintln!("warning: {n_failed} of {n_total} files failed; see manifest.json");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn labels_rows(ids: &[String], labels: &[usize]) -> Vec<(String, usize)> {
    ids.iter().cloned().zip(labels.iter().copied()).collect()
}

fn cmd_synth_blobs(args: &SynthBlobsArgs) -> Result<ExitCode> {
    let (features, labels) = synth_blobs(&BlobSpec {
        n_clusters: args.clusters,
        per_cluster: args.per_cluster,
        dim: args.dim,
        separation: args.separation,
        seed: args.seed,
    })?;
    fs::create_dir_all(&args.out)?;
    write_matrix_csv(&args.out.join("features.csv"), &features)?;
    let ids: Vec<String> = (0..labels.len()).map(item_id).collect();
    write_labels_csv(&args.out.join("labels.csv"), &labels_rows(&ids, &labels))?;
    let items = ids
        .iter()
        .zip(&labels)
        .enumerate()
        .map(|(row, (id, &label))| ManifestItem {
            id: id.clone(),
            path: None,
            row: Some(row),
            label: Some(label),
        })
        .collect();
    let manifest = Manifest {
        provenance: Provenance::Synthetic,
        features_matrix: Some("features.csv".into()),
        items,
        failures: Vec::new(),
    };
    manifest.save(&args.out.join("manifest.json"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth_scenes(args: &SynthScenesArgs) -> Result<ExitCode> {
    let items = synth_scenes(&SceneSpec {
        n_classes: args.classes,
        per_class: args.per_class,
        seed: args.seed,
        ..SceneSpec::default()
    })?;
    fs::create_dir_all(&args.out)?;
    let mut manifest_items = Vec::new();
    let mut rows = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let id = format!("scene-{i:04}");
        let name = format!("{id}.wav");
        write_wav(&args.out.join(&name), &item.signal)?;
        rows.push((id.clone(), item.label));
        manifest_items.push(ManifestItem {
            id,
            path: Some(name),
            row: None,
            label: Some(item.label),
        });
    }
    write_labels_csv(&args.out.join("labels.csv"), &rows)?;
    let manifest = Manifest {
        provenance: Provenance::Wav,
        features_matrix: None,
        items: manifest_items,
        failures: Vec::new(),
    };
    manifest.save(&args.out.join("manifest.json"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_subsample(args: &SubsampleArgs) -> Result<ExitCode> {
    let manifest = Manifest::load(&args.manifest)?;
    let labels = manifest
        .labels()?
        .ok_or_else(|| Error::InvalidInput("subsample needs a labeled dataset".into()))?;
    let kept = subsample_imbalanced(&labels, args.r_min, args.seed)?;
    fs::create_dir_all(&args.out)?;
    let src_dir = args.manifest.parent().unwrap_or(Path::new("."));

    let mut items = Vec::new();
    let mut rows = Vec::new();
    if let Some(rel) = &manifest.features_matrix {
        let full = read_matrix_csv(&src_dir.join(rel))?;
        let mut picked = Vec::new();
        for (new_row, &old) in kept.iter().enumerate() {
            let item = &manifest.items[old];
            let src_row = item.row.ok_or_else(|| {
                Error::InvalidInput(format!("item {} has no matrix row", item.id))
            })?;
            if src_row >= full.rows() {
                return Err(Error::InvalidInput(format!(
                    "item {} points at row {src_row} of a {}-row matrix",
                    item.id,
                    full.rows()
                )));
            }
            picked.push(full.row(src_row).to_vec());
            items.push(ManifestItem { row: Some(new_row), ..item.clone() });
            rows.push((item.id.clone(), item.label.unwrap()));
        }
        write_matrix_csv(&args.out.join("features.csv"), &Matrix::from_rows(&picked)?)?;
    } else {
        for &old in &kept {
            let item = &manifest.items[old];
            let rel = item.path.as_ref().ok_or_else(|| {
                Error::InvalidInput(format!("item {} has no feature path", item.id))
            })?;
            fs::copy(src_dir.join(rel), args.out.join(rel))?;
            let sidecar = Path::new(rel).with_extension("json");
            if src_dir.join(&sidecar).exists() {
                fs::copy(src_dir.join(&sidecar), args.out.join(&sidecar))?;
            }
            items.push(item.clone());
            rows.push((item.id.clone(), item.label.unwrap()));
        }
    }
    write_labels_csv(&args.out.join("labels.csv"), &rows)?;
    let manifest = Manifest {
        provenance: manifest.provenance,
        features_matrix: manifest.features_matrix.as_ref().map(|_| "features.csv".into()),
        items,
        failures: Vec::new(),
    };
    manifest.save(&args.out.join("manifest.json"))?;
    Ok(ExitCode::SUCCESS)
}

/// Summary of one clustering run, written alongside the trace.
#[derive(Serialize)]
struct ResultSummary {
    k_s: usize,
    n_clusters: usize,
    gamma: f64,
    selected_timestep: usize,
    updates: Vec<UpdateEntry>,
}

fn write_result(dir: &Path, ids: &[String], result: &ClusteringResult, k_s: usize) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_labels_csv(&dir.join("labels.csv"), &labels_rows(ids, &result.labels))?;
    write_matrix_csv(&dir.join("embeddings.csv"), result.embeddings.vectors())?;
    let mut trace = String::new();
    for entry in &result.trace.merges {
        trace.push_str(&serde_json::to_string(entry)?);
        trace.push('\n');
    }
    fs::write(dir.join("trace.jsonl"), trace)?;
    let summary = ResultSummary {
        k_s,
        n_clusters: result.n_clusters,
        gamma: result.gamma,
        selected_timestep: result.selected_timestep,
        updates: result.trace.updates.clone(),
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(dir.join("result.json"), text)?;
    if let Some(params) = &result.params {
        save_params(params, &dir.join("params.bin"))?;
    }
    Ok(())
}

enum ClusterInput {
    Vectors(Vec<String>, EmbeddingSet),
    Features(Vec<String>, Vec<LmsFeature>),
}

fn load_cluster_input(args: &ClusterArgs) -> Result<ClusterInput> {
    if let Some(path) = &args.features {
        let m = read_matrix_csv(path)?;
        let ids = (0..m.rows()).map(item_id).collect();
        return Ok(ClusterInput::Vectors(ids, EmbeddingSet::new(m)?));
    }
    let Some(manifest_path) = &args.manifest else {
        return Err(Error::InvalidInput("pass --manifest or --features".into()));
    };
    let manifest = Manifest::load(manifest_path)?;
    if manifest.features_matrix.is_some() {
        let (ids, m, _) = load_matrix_dataset(manifest_path)?;
        Ok(ClusterInput::Vectors(ids, EmbeddingSet::new(m)?))
    } else {
        let (ids, features, _) = load_feature_dataset(manifest_path)?;
        Ok(ClusterInput::Features(ids, features))
    }
}

fn cmd_cluster(args: &ClusterArgs) -> Result<ExitCode> {
    let mut cfg = load_run_config(&args.config)?;
    if let Some(v) = args.nc_min {
        cfg.joint.nc_min = v;
    }
    if let Some(v) = args.nc_max {
        cfg.joint.nc_max = v;
    }
    if let Some(v) = args.unrolled_steps {
        cfg.joint.unrolled_steps = v;
    }
    if let Some(v) = args.seed {
        cfg.joint.seed = v;
    }
    let input = load_cluster_input(args)?;
    let joint = cfg.joint;
    let (ids, run_one): (&[String], Box<dyn Fn(usize) -> Result<ClusteringResult>>) = match &input
    {
        ClusterInput::Vectors(ids, x) => {
            if !args.fixed_features {
                return Err(Error::InvalidInput(
                    "vector datasets cluster with --fixed-features; the network trains on per-item features".into(),
                ));
            }
            let base = joint.clone();
            (ids, Box::new(move |k_s| run_fixed_features(x, &JointConfig { k_s, ..base.clone() })))
        }
        ClusterInput::Features(ids, features) => {
            if args.fixed_features {
                return Err(Error::InvalidInput(
                    "--fixed-features needs a vector dataset, not per-item features".into(),
                ));
            }
            let base = joint.clone();
            (ids, Box::new(move |k_s| run(features, &JointConfig { k_s, ..base.clone() })))
        }
    };

    let ks = args.ks.clone().unwrap_or_else(|| vec![joint.k_s]);
    if ks.is_empty() {
        return Err(Error::InvalidInput("--ks lists no values".into()));
    }
    if ks.len() == 1 {
        let result = run_one(ks[0])?;
        write_result(&args.out, ids, &result, ks[0])?;
        return Ok(ExitCode::SUCCESS);
    }

    fs::create_dir_all(&args.out)?;
    let mut sweep = String::from("k_s,n_clusters,gamma\n");
    let mut succeeded = 0;
    let mut last_err = None;
    for &k_s in &ks {
        match run_one(k_s) {
            Ok(result) => {
                write_result(&args.out.join(format!("ks-{k_s}")), ids, &result, k_s)?;
                sweep.push_str(&format!("{k_s},{},{}\n", result.n_clusters, result.gamma));
                succeeded += 1;
            }
            Err(e) => {
                eprintln!("warning: k_s={k_s} failed: {e}");
                last_err = Some(e);
            }
        }
    }
    fs::write(args.out.join("sweep.csv"), sweep)?;
    match (succeeded, last_err) {
        (0, Some(e)) => Err(e),
        _ => Ok(ExitCode::SUCCESS),
    }
}

#[derive(Serialize)]
struct Report {
    nmi: f64,
    ca: f64,
    n_clusters: usize,
    n_classes: usize,
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<ExitCode> {
    let truth = read_labels_csv(&args.true_labels)?;
    let pred = read_labels_csv(&args.pred_labels)?;
    if truth.len() != pred.len() {
        return Err(Error::InvalidInput(format!(
            "label files disagree on item count: {} vs {}",
            truth.len(),
            pred.len()
        )));
    }
    let by_id: BTreeMap<&str, usize> =
        pred.iter().map(|(id, label)| (id.as_str(), *label)).collect();
    if by_id.len() != pred.len() {
        return Err(Error::InvalidInput("predicted labels repeat an id".into()));
    }
    let true_ids: std::collections::BTreeSet<&str> =
        truth.iter().map(|(id, _)| id.as_str()).collect();
    if true_ids.len() != truth.len() {
        return Err(Error::InvalidInput("reference labels repeat an id".into()));
    }
    let mut true_vec = Vec::new();
    let mut pred_vec = Vec::new();
    for (id, label) in &truth {
        let Some(&p) = by_id.get(id.as_str()) else {
            return Err(Error::InvalidInput(format!("id {id} has no predicted label")));
        };
        true_vec.push(*label);
        pred_vec.push(p);
    }
    let report = Report {
        nmi: nmi(&pred_vec, &true_vec)?,
        ca: clustering_accuracy(&pred_vec, &true_vec)?,
        n_clusters: distinct(&pred_vec),
        n_classes: distinct(&true_vec),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn distinct(labels: &[usize]) -> usize {
    labels.iter().collect::<std::collections::BTreeSet<_>>().len()
}

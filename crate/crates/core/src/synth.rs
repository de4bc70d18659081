//! Synthetic datasets: Gaussian blobs for fixed-feature runs, tonal scene
//! recordings for end-to-end runs, and a class-imbalance subsampler.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::features::AudioSignal;
use crate::matrix::Matrix;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64 + 1).wrapping_mul(GOLDEN))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub n_clusters: usize,
    pub per_cluster: usize,
    pub dim: usize,
    /// Distance between cluster centers, in units of the unit per-coordinate
    /// noise.
    pub separation: f64,
    pub seed: u64,
}

/// Isotropic Gaussian blobs with grouped labels; row g*per_cluster+i belongs
/// to cluster g.
pub fn synth_blobs(spec: &BlobSpec) -> Result<(Matrix, Vec<usize>)> {
    if spec.n_clusters < 2 {
        return Err(Error::InvalidInput("need at least 2 blobs".into()));
    }
    if spec.per_cluster == 0 || spec.dim == 0 {
        return Err(Error::InvalidInput("per_cluster and dim must be positive".into()));
    }
    if !(spec.separation > 0.0 && spec.separation.is_finite()) {
        return Err(Error::InvalidInput("separation must be positive and finite".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<Vec<f64>> = if spec.dim >= spec.n_clusters {
        // Scaled basis vectors are pairwise exactly `separation` apart.
        let scale = spec.separation / 2f64.sqrt();
        (0..spec.n_clusters)
            .map(|g| {
                let mut c = vec![0.0; spec.dim];
                c[g] = scale;
                c
            })
            .collect()
    } else {
        let radius = spec.separation
            * (spec.n_clusters as f64).powf(1.0 / spec.dim as f64).max(1.0);
        let mut centers: Vec<Vec<f64>> = Vec::new();
        let mut attempts = 0;
        while centers.len() < spec.n_clusters {
            attempts += 1;
            if attempts > 1000 * spec.n_clusters {
                return Err(Error::InvalidInput(format!(
                    "cannot place {} centers {} apart in {} dimensions",
                    spec.n_clusters, spec.separation, spec.dim
                )));
            }
            let cand: Vec<f64> =
                (0..spec.dim).map(|_| rng.random_range(-radius..radius)).collect();
            let ok = centers.iter().all(|c| {
                let d2: f64 = c.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum();
                d2 >= spec.separation * spec.separation
            });
            if ok {
                centers.push(cand);
            }
        }
        centers
    };

    let n = spec.n_clusters * spec.per_cluster;
    let mut features = Matrix::zeros(n, spec.dim);
    let mut labels = Vec::with_capacity(n);
    for g in 0..spec.n_clusters {
        for i in 0..spec.per_cluster {
            let row = features.row_mut(g * spec.per_cluster + i);
            for (d, v) in row.iter_mut().enumerate() {
                let noise: f64 = rng.sample(StandardNormal);
                *v = centers[g][d] + noise;
            }
            labels.push(g);
        }
    }
    Ok((features, labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub n_classes: usize,
    pub per_class: usize,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> SceneSpec {
        SceneSpec { n_classes: 4, per_class: 25, sample_rate: 22050, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SceneItem {
    pub signal: AudioSignal,
    pub label: usize,
}

/// Tonal scene classes in disjoint frequency bands. Each item is 1 to 3
/// seconds of two jittered tones plus band-limited and wideband noise.
pub fn synth_scenes(spec: &SceneSpec) -> Result<Vec<SceneItem>> {
    if spec.n_classes == 0 || spec.per_class == 0 {
        return Err(Error::InvalidInput("n_classes and per_class must be positive".into()));
    }
    if spec.sample_rate < 4000 {
        return Err(Error::InvalidInput("sample rate must be at least 4000 Hz".into()));
    }
    let lo = 300.0;
    let hi = (0.45 * spec.sample_rate as f64).min(8000.0);
    let ratio = (hi / lo).powf(1.0 / spec.n_classes as f64);

    let mut items = Vec::with_capacity(spec.n_classes * spec.per_class);
    for c in 0..spec.n_classes {
        let band_lo = lo * ratio.powi(c as i32);
        let band_hi = band_lo * ratio;
        let band_span = band_hi / band_lo;
        for i in 0..spec.per_class {
            let mut rng = item_rng(spec.seed, c * spec.per_class + i);
            let secs = rng.random_range(1.0..3.0);
            let n = (secs * spec.sample_rate as f64).round() as usize;

            let mut components: Vec<(f64, f64, f64)> = Vec::new(); // (amp, freq, phase)
            for (amp, pos) in [(0.42, 0.3), (0.3, 0.7)] {
                let jitter = rng.random_range(-0.05..0.05);
                let freq = band_lo * band_span.powf(pos + jitter);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                components.push((amp, freq, phase));
            }
            let n_noise = 24;
            let noise_amp = 0.2 / (n_noise as f64).sqrt();
            for _ in 0..n_noise {
                let freq = band_lo * band_span.powf(rng.random_range(0.0..1.0));
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                components.push((noise_amp, freq, phase));
            }

            let dt = std::f64::consts::TAU / spec.sample_rate as f64;
            let mut samples = Vec::with_capacity(n);
            for s in 0..n {
                let t = s as f64 * dt;
                let mut v = 0.0;
                for &(amp, freq, phase) in &components {
                    v += amp * (freq * t + phase).sin();
                }
                v += rng.random_range(-0.02..0.02);
                samples.push(v.clamp(-0.98, 0.98));
            }
            items.push(SceneItem {
                signal: AudioSignal { samples, sample_rate: spec.sample_rate },
                label: c,
            });
        }
    }
    Ok(items)
}

/// Keep a linearly ramped fraction of each class, from `r_min` for the
/// first class of a random ordering up to all of the last one. Returns the
/// retained item indices in ascending order.
pub fn subsample_imbalanced(labels: &[usize], r_min: f64, seed: u64) -> Result<Vec<usize>> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("label vector is empty".into()));
    }
    if !(r_min > 0.0 && r_min <= 1.0) {
        return Err(Error::InvalidInput(format!("r_min must be in (0, 1], got {r_min}")));
    }
    let n_classes = labels.iter().max().unwrap() + 1;
    let mut members = vec![Vec::new(); n_classes];
    for (idx, &c) in labels.iter().enumerate() {
        members[c].push(idx);
    }
    if let Some(empty) = members.iter().position(Vec::is_empty) {
        return Err(Error::InvalidInput(format!("class {empty} has no items")));
    }
    if n_classes < 2 {
        return Err(Error::InvalidInput("need at least 2 classes to imbalance".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut class_order: Vec<usize> = (0..n_classes).collect();
    class_order.shuffle(&mut rng);

    let mut keep = Vec::new();
    for (position, &class) in class_order.iter().enumerate() {
        let rate = r_min + (1.0 - r_min) * position as f64 / (n_classes - 1) as f64;
        let mut pool = members[class].clone();
        pool.shuffle(&mut rng);
        let count = (rate * pool.len() as f64).round() as usize;
        if count == 0 {
            return Err(Error::InvalidInput(format!(
                "class {class} would be emptied at rate {rate:.3}; raise r_min"
            )));
        }
        keep.extend_from_slice(&pool[..count]);
    }
    keep.sort_unstable();
    Ok(keep)
}

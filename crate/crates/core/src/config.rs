//! Named run profiles and config file loading.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::LmsConfig;
use crate::joint::JointConfig;
use crate::network::{ConvSpec, NetworkConfig};

/// Everything a clustering run needs: feature extraction settings plus the
/// joint optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub lms: LmsConfig,
    pub joint: JointConfig,
}

/// Settings small enough to iterate on quickly: one input channel, 64 mel
/// bands, two small conv stages.
pub fn desk_profile() -> RunConfig {
    RunConfig::default()
}

/// Settings mirroring the reference acoustic-scene setup: 208 mel bands
/// over four 100-frame channels, a 160-wide embedding, and a wider search
/// interval. Expect long runtimes.
pub fn paper_profile() -> RunConfig {
    RunConfig {
        lms: LmsConfig { n_mel: 208, ..LmsConfig::default() },
        joint: JointConfig {
            k_s: 19,
            nc_min: 3,
            nc_max: 30,
            unrolled_steps: 10,
            epochs_per_update: 2,
            network: NetworkConfig {
                input_shape: (4, 208, 100),
                conv_layers: vec![
                    ConvSpec { kernel: 3, out_channels: 5, stride: 1 },
                    ConvSpec { kernel: 3, out_channels: 5, stride: 1 },
                ],
                fc_sizes: vec![10500, 160],
                n_output_classes: 30,
                learning_rate: 1e-3,
                weight_decay: 0.1,
                batch_size: 60,
                max_iterations: 3000,
                seed: 0,
            },
            seed: 0,
        },
    }
}

/// Resolve a `--config` argument: the name of a built-in profile or a path
/// to a JSON file.
pub fn load_run_config(spec: &str) -> Result<RunConfig> {
    match spec {
        "desk" => Ok(desk_profile()),
        "paper" => Ok(paper_profile()),
        path => {
            let text = std::fs::read_to_string(Path::new(path)).map_err(|e| {
                Error::InvalidInput(format!("cannot read config {path}: {e}"))
            })?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

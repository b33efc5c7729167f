//! Optional run-config file. Precedence everywhere: built-in defaults,
//! then the config file, then command-line flags.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

use feye_core::{GeneratorConfig, LossConfig, OptimizerConfig, TrainConfig};

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub patch_size: Option<usize>,
    pub scheme: Option<String>,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub generator: GeneratorSection,
    #[serde(default)]
    pub probe: ProbeSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    pub temperature: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub momentum: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hidden_dims: Option<Vec<usize>>,
    pub representation_dim: Option<usize>,
    pub embedding_dim: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub num_images: Option<usize>,
    pub objects_per_image: Option<(usize, usize)>,
    pub size_range: Option<(f64, f64)>,
    pub class_weights: Option<[f64; 5]>,
    pub noise_std: Option<f64>,
    pub image_size: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub train_fraction: Option<f64>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub knn_k: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
            }
        }
    }

    /// Seed resolution: flag, then file, then default 7.
    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(7)
    }

    pub fn patch_size(&self, flag: Option<usize>) -> usize {
        flag.or(self.patch_size).unwrap_or(32)
    }

    pub fn loss_config(&self, temperature: Option<f64>, alpha: Option<f64>) -> LossConfig {
        let defaults = LossConfig::default();
        LossConfig {
            temperature: temperature
                .or(self.loss.temperature)
                .unwrap_or(defaults.temperature),
            alpha: alpha.or(self.loss.alpha).unwrap_or(defaults.alpha),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn train_config(
        &self,
        seed: u64,
        epochs: Option<usize>,
        batch: Option<usize>,
        lr: Option<f64>,
        weight_decay: Option<f64>,
        momentum: Option<f64>,
    ) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            epochs: epochs.or(self.training.epochs).unwrap_or(d.epochs),
            batch_size: batch.or(self.training.batch_size).unwrap_or(d.batch_size),
            optimizer: OptimizerConfig {
                learning_rate: lr
                    .or(self.training.learning_rate)
                    .unwrap_or(d.optimizer.learning_rate),
                weight_decay: weight_decay
                    .or(self.training.weight_decay)
                    .unwrap_or(d.optimizer.weight_decay),
                momentum: momentum
                    .or(self.training.momentum)
                    .unwrap_or(d.optimizer.momentum),
            },
            seed,
        }
    }

    pub fn generator_config(
        &self,
        seed: u64,
        patch_size: usize,
        images: Option<usize>,
        noise_std: Option<f64>,
    ) -> GeneratorConfig {
        let d = GeneratorConfig::default();
        GeneratorConfig {
            seed,
            num_images: images.or(self.generator.num_images).unwrap_or(d.num_images),
            objects_per_image: self
                .generator
                .objects_per_image
                .unwrap_or(d.objects_per_image),
            size_range: self.generator.size_range.unwrap_or(d.size_range),
            class_weights: self.generator.class_weights.unwrap_or(d.class_weights),
            calibration: d.calibration,
            noise_std: noise_std.or(self.generator.noise_std).unwrap_or(d.noise_std),
            image_size: self.generator.image_size.unwrap_or(d.image_size),
            patch_size,
        }
    }
}

/// Parses a comma-separated list of hidden layer widths.
pub fn parse_dims(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .with_context(|| format!("bad layer width {part:?}"))
        })
        .collect()
}

/// Parses a comma-separated alpha list.
pub fn parse_alphas(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .with_context(|| format!("bad alpha {part:?}"))
        })
        .collect()
}

//! Trainable encoder/projection pipeline with hand-written reverse-mode
//! gradients.
//!
//! The encoder is an MLP (flatten -> hidden layers -> representation) and
//! the projection head is a single-hidden-layer MLP whose output is
//! l2-normalized into the embedding the contrastive losses act on. The
//! projection head exists only to shape the loss space and is kept in
//! checkpoints but marked discardable; probes read the representation.
//!
//! All math is 64-bit and sequential in a fixed order, so training runs
//! are bit-reproducible for a given seed.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contrastive::{combined_loss, infonce_loss, supcon_loss, EmbeddingBatch, LabelKind, LossConfig};
use crate::dataset::PatchPool;
use crate::error::{Error, Result};
use crate::pixels::PixelBuffer;
use crate::seeding::stream_rng;

/// One affine layer; `weights` is `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl AffineLayer {
    fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weights =
            Array2::from_shape_fn((out_dim, in_dim), |_| rng.random_range(-bound..bound));
        let bias = Array1::from_shape_fn(out_dim, |_| rng.random_range(-bound..bound));
        Self { weights, bias }
    }

    fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// Layer widths for the encoder and projection head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub representation_dim: usize,
    /// Projection hidden width; defaults to the representation width.
    pub projection_hidden_dim: Option<usize>,
    pub embedding_dim: usize,
}

impl ModelConfig {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dims: vec![256, 256],
            representation_dim: 128,
            projection_hidden_dim: None,
            embedding_dim: 128,
        }
    }

    pub fn for_pool(pool: &PatchPool) -> Self {
        Self::new(
            usize::from(pool.patch_height)
                * usize::from(pool.patch_width)
                * usize::from(pool.channels),
        )
    }

    /// 512-dim representation preset.
    pub fn wide(input_dim: usize) -> Self {
        Self {
            representation_dim: 512,
            ..Self::new(input_dim)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0
            || self.representation_dim == 0
            || self.embedding_dim == 0
            || self.hidden_dims.iter().any(|&d| d == 0)
        {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Encoder plus projection head. The first `encoder_layers` entries of
/// `layers` form the encoder f(.); the final two are the projection G(.).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    layers: Vec<AffineLayer>,
    relu_after: Vec<bool>,
    encoder_layers: usize,
}

/// Activations cached by [`EncoderModel::forward`] for the exact backward
/// pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Encoder output r, one row per input.
    pub representations: Array2<f64>,
    /// Unit-norm projection output z, one row per input.
    pub embeddings: Array2<f64>,
    cache: ForwardCache,
}

#[derive(Debug, Clone)]
struct ForwardCache {
    layer_inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    norms: Array1<f64>,
}

/// Per-parameter gradients, matching the model's layer order.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

impl EncoderModel {
    /// Builds a model with seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
    /// initialization.
    pub fn init(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let mut dims = vec![cfg.input_dim];
        dims.extend(&cfg.hidden_dims);
        dims.push(cfg.representation_dim);
        let encoder_layers = dims.len() - 1;
        let projection_hidden = cfg.projection_hidden_dim.unwrap_or(cfg.representation_dim);
        dims.push(projection_hidden);
        dims.push(cfg.embedding_dim);

        let mut layers = Vec::with_capacity(dims.len() - 1);
        let mut relu_after = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            layers.push(AffineLayer::init(w[0], w[1], rng));
        }
        // ReLU between encoder layers and after the projection hidden
        // layer; none on the representation or the projection output.
        for l in 0..layers.len() {
            let is_repr = l == encoder_layers - 1;
            let is_output = l == layers.len() - 1;
            relu_after.push(!is_repr && !is_output);
        }
        Ok(Self {
            layers,
            relu_after,
            encoder_layers,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn representation_dim(&self) -> usize {
        self.layers[self.encoder_layers - 1].out_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.layers.last().expect("nonempty").out_dim()
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    /// Forward pass over a batch (rows are flattened inputs). Returns the
    /// representations, unit-norm embeddings, and the cache backward
    /// needs.
    pub fn forward(&self, inputs: &Array2<f64>) -> Result<ForwardPass> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input dim {} does not match model input {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut activation = inputs.clone();
        let mut representations = None;
        for (l, layer) in self.layers.iter().enumerate() {
            layer_inputs.push(activation.clone());
            let mut pre = activation.dot(&layer.weights.t());
            pre += &layer.bias;
            pre_activations.push(pre.clone());
            activation = if self.relu_after[l] {
                pre.mapv(|v| v.max(0.0))
            } else {
                pre
            };
            if l == self.encoder_layers - 1 {
                representations = Some(activation.clone());
            }
        }
        let pre_norm = activation;
        let mut norms = Array1::zeros(pre_norm.nrows());
        for (i, row) in pre_norm.rows().into_iter().enumerate() {
            let n = row.dot(&row).sqrt();
            if !n.is_finite() || n < 1e-12 {
                return Err(Error::invalid(
                    "forward",
                    "projection output row has zero norm and cannot be normalized",
                ));
            }
            norms[i] = n;
        }
        let mut embeddings = pre_norm;
        for (mut row, &n) in embeddings.rows_mut().into_iter().zip(norms.iter()) {
            row.mapv_inplace(|v| v / n);
        }
        Ok(ForwardPass {
            representations: representations.expect("encoder boundary"),
            embeddings,
            cache: ForwardCache {
                layer_inputs,
                pre_activations,
                norms,
            },
        })
    }

    /// Exact reverse pass: maps `d(loss)/d(embeddings)` to gradients for
    /// every weight and bias, including the l2-normalization Jacobian.
    pub fn backward(&self, pass: &ForwardPass, grad_embeddings: &Array2<f64>) -> Result<ParamGrads> {
        let z = &pass.embeddings;
        if grad_embeddings.dim() != z.dim() {
            return Err(Error::Shape(format!(
                "gradient shape {:?} does not match embeddings {:?}",
                grad_embeddings.dim(),
                z.dim()
            )));
        }
        // Through z = y / ||y||: dL/dy = (g - (g.z) z) / ||y||.
        let mut grad = Array2::<f64>::zeros(z.dim());
        for i in 0..z.nrows() {
            let zi = z.row(i);
            let gi = grad_embeddings.row(i);
            let radial = gi.dot(&zi);
            let norm = pass.cache.norms[i];
            for j in 0..z.ncols() {
                grad[[i, j]] = (gi[j] - radial * zi[j]) / norm;
            }
        }

        let mut weight_grads = vec![Array2::zeros((0, 0)); self.layers.len()];
        let mut bias_grads = vec![Array1::zeros(0); self.layers.len()];
        for l in (0..self.layers.len()).rev() {
            if self.relu_after[l] {
                let pre = &pass.cache.pre_activations[l];
                grad.zip_mut_with(pre, |g, &h| {
                    if h <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            weight_grads[l] = grad.t().dot(&pass.cache.layer_inputs[l]);
            bias_grads[l] = grad.sum_axis(Axis(0));
            if l > 0 {
                grad = grad.dot(&self.layers[l].weights);
            }
        }
        Ok(ParamGrads {
            weights: weight_grads,
            bias: bias_grads,
        })
    }

    /// Flat view of all parameters, used by gradient checks.
    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Mutable access for optimizer updates and perturbation-based tests.
    pub fn layers_mut(&mut self) -> &mut [AffineLayer] {
        &mut self.layers
    }

    pub fn encoder_layer_count(&self) -> usize {
        self.encoder_layers
    }
}

/// SGD hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub momentum: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            weight_decay: 0.0001,
            momentum: 0.9,
        }
    }
}

/// SGD with momentum and decoupled weight decay folded into the velocity:
/// `v <- momentum*v + grad + weight_decay*param; param <- param - lr*v`.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    velocity_w: Vec<Array2<f64>>,
    velocity_b: Vec<Array1<f64>>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, model: &EncoderModel) -> Self {
        Self {
            config,
            velocity_w: model
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weights.dim()))
                .collect(),
            velocity_b: model
                .layers
                .iter()
                .map(|l| Array1::zeros(l.bias.len()))
                .collect(),
        }
    }

    pub fn step(&mut self, model: &mut EncoderModel, grads: &ParamGrads) -> Result<()> {
        if grads.weights.len() != model.layers.len() {
            return Err(Error::Shape("gradient layer count mismatch".into()));
        }
        let OptimizerConfig {
            learning_rate,
            weight_decay,
            momentum,
        } = self.config;
        for (l, layer) in model.layers.iter_mut().enumerate() {
            let vw = &mut self.velocity_w[l];
            *vw = momentum * &*vw + &grads.weights[l] + weight_decay * &layer.weights;
            layer.weights.scaled_add(-learning_rate, vw);

            let vb = &mut self.velocity_b[l];
            *vb = momentum * &*vb + &grads.bias[l] + weight_decay * &layer.bias;
            layer.bias.scaled_add(-learning_rate, vb);
        }
        Ok(())
    }
}

/// Augmentation parameters for the two-view pipeline:
/// crop -> resize -> flip -> brightness/contrast jitter -> normalize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    /// Side-fraction range of the random crop.
    pub crop_scale: (f64, f64),
    pub flip_prob: f64,
    /// Brightness/contrast factors are drawn from `1 +/- jitter`.
    pub jitter: f64,
    pub normalize_mean: Vec<f64>,
    pub normalize_std: Vec<f64>,
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.crop_scale;
        if !(lo > 0.0 && hi <= 1.0 && lo <= hi) {
            return Err(Error::Config(format!("crop scale ({lo}, {hi}) outside (0, 1]")));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::Config("flip probability outside [0, 1]".into()));
        }
        if self.jitter < 0.0 || self.normalize_std.iter().any(|&s| s <= 0.0) {
            return Err(Error::Config("bad jitter or normalization std".into()));
        }
        Ok(())
    }

    /// Default augmentation with normalization statistics taken globally
    /// per channel over the pool.
    pub fn for_pool(pool: &PatchPool) -> Self {
        let (mean, std) = pool_channel_stats(pool);
        Self {
            crop_scale: (0.5, 1.0),
            flip_prob: 0.5,
            jitter: 0.2,
            normalize_mean: mean,
            normalize_std: std,
        }
    }
}

/// Global per-channel mean and std over every patch in the pool.
pub fn pool_channel_stats(pool: &PatchPool) -> (Vec<f64>, Vec<f64>) {
    let ch = usize::from(pool.channels);
    let mut sum = vec![0.0; ch];
    let mut sum_sq = vec![0.0; ch];
    let mut count = 0usize;
    for patch in &pool.patches {
        for px in patch.pixels.data().chunks_exact(ch) {
            for (c, &v) in px.iter().enumerate() {
                sum[c] += v;
                sum_sq[c] += v * v;
            }
        }
        count += patch.pixels.height() * patch.pixels.width();
    }
    let n = count.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std: Vec<f64> = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| {
            let var = (sq / n - m * m).max(0.0);
            let s = var.sqrt();
            if s < 1e-6 {
                1.0
            } else {
                s
            }
        })
        .collect();
    (mean, std)
}

/// One augmented view. Draws are always consumed in the same order
/// (crop scale, crop offsets, flip, brightness, contrast) so streams stay
/// aligned across configs.
pub fn augment_view(
    patch: &PixelBuffer,
    cfg: &AugmentationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PixelBuffer> {
    let (h, w) = (patch.height(), patch.width());
    let scale = rng.random_range(cfg.crop_scale.0..=cfg.crop_scale.1);
    let crop_h = ((h as f64 * scale).round() as usize).clamp(1, h);
    let crop_w = ((w as f64 * scale).round() as usize).clamp(1, w);
    let top = rng.random_range(0..=h - crop_h);
    let left = rng.random_range(0..=w - crop_w);
    let mut view = patch.resample_region(
        top as f64,
        left as f64,
        (top + crop_h) as f64,
        (left + crop_w) as f64,
        h,
        w,
    )?;
    if rng.random::<f64>() < cfg.flip_prob {
        view = view.flip_horizontal();
    }
    let brightness = 1.0 + rng.random_range(-cfg.jitter..=cfg.jitter);
    let contrast = 1.0 + rng.random_range(-cfg.jitter..=cfg.jitter);
    if cfg.jitter > 0.0 {
        let means = view.channel_means();
        let ch = view.channels();
        for (i, v) in view.data_mut().iter_mut().enumerate() {
            let m = means[i % ch];
            *v = (((*v * brightness) - m) * contrast + m).clamp(0.0, 1.0);
        }
    }
    // Normalize per channel.
    let ch = view.channels();
    for (i, v) in view.data_mut().iter_mut().enumerate() {
        let c = i % ch;
        *v = (*v - cfg.normalize_mean[c]) / cfg.normalize_std[c];
    }
    Ok(view)
}

/// Two independent augmented views of the same patch; labels ride along
/// unchanged.
pub fn augment_pair(
    patch: &PixelBuffer,
    cfg: &AugmentationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(PixelBuffer, PixelBuffer)> {
    Ok((augment_view(patch, cfg, rng)?, augment_view(patch, cfg, rng)?))
}

/// Normalization-only path used when embedding un-augmented patches.
pub fn normalize_patch(patch: &PixelBuffer, cfg: &AugmentationConfig) -> Vec<f64> {
    let ch = patch.channels();
    patch
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - cfg.normalize_mean[i % ch]) / cfg.normalize_std[i % ch])
        .collect()
}

/// Training loop parameters. `batch_size` counts patches; each step sees
/// twice as many augmented views.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            batch_size: 64,
            optimizer: OptimizerConfig::default(),
            seed: 7,
        }
    }
}

/// Which objective drives pre-training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// Alpha-weighted combination of distortion and semantic terms.
    Combined,
    SemanticOnly,
    DistortionOnly,
    InfoNce,
}

impl LossKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "combined" => Ok(LossKind::Combined),
            "semantic" => Ok(LossKind::SemanticOnly),
            "distortion" => Ok(LossKind::DistortionOnly),
            "infonce" => Ok(LossKind::InfoNce),
            other => Err(Error::Config(format!(
                "unknown loss kind {other:?}; expected combined|semantic|distortion|infonce"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Combined => "combined",
            LossKind::SemanticOnly => "semantic",
            LossKind::DistortionOnly => "distortion",
            LossKind::InfoNce => "infonce",
        }
    }
}

/// Result of one pre-training run.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: EncoderModel,
    /// Mean loss per epoch over processed batches.
    pub loss_curve: Vec<f64>,
    pub augmentation: AugmentationConfig,
    /// Batches skipped because their label partition was degenerate.
    pub skipped_batches: usize,
}

/// Contrastive pre-training over a labeled pool.
///
/// Epochs are seeded shuffles of the pool; each batch of N patches is
/// augmented into 2N views. Batches whose label partition is degenerate
/// (for the active loss) are skipped with a logged warning. Trailing
/// chunks smaller than two patches are dropped.
pub fn pretrain(
    pool: &PatchPool,
    model_cfg: &ModelConfig,
    loss_cfg: &LossConfig,
    train_cfg: &TrainConfig,
    kind: LossKind,
) -> Result<TrainResult> {
    if pool.is_empty() {
        return Err(Error::invalid("pretrain", "empty patch pool"));
    }
    loss_cfg.validate()?;
    if train_cfg.batch_size < 2 || train_cfg.epochs == 0 {
        return Err(Error::Config(
            "need batch_size >= 2 and at least one epoch".into(),
        ));
    }
    let expected_dim = usize::from(pool.patch_height)
        * usize::from(pool.patch_width)
        * usize::from(pool.channels);
    if model_cfg.input_dim != expected_dim {
        return Err(Error::Shape(format!(
            "model input dim {} vs pool patch dim {expected_dim}",
            model_cfg.input_dim
        )));
    }

    let augmentation = AugmentationConfig::for_pool(pool);
    let mut init_rng = stream_rng(train_cfg.seed, "init", 0);
    let mut model = EncoderModel::init(model_cfg, &mut init_rng)?;
    let mut optimizer = OptimizerState::new(train_cfg.optimizer, &model);
    let mut train_rng = stream_rng(train_cfg.seed, "train", 0);

    let mut loss_curve = Vec::with_capacity(train_cfg.epochs);
    let mut skipped_batches = 0usize;
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    for epoch in 0..train_cfg.epochs {
        shuffle(&mut indices, &mut train_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in indices.chunks(train_cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let (inputs, semantic, distortion, pairs) =
                assemble_views(pool, chunk, &augmentation, &mut train_rng)?;
            let pass = model.forward(&inputs)?;
            let batch = EmbeddingBatch::new(
                pass.embeddings.clone(),
                semantic,
                distortion,
            )?
            .with_view_pairs(pairs)?;
            let loss = match kind {
                LossKind::Combined => combined_loss(&batch, loss_cfg),
                LossKind::SemanticOnly => supcon_loss(&batch, LabelKind::Semantic, loss_cfg),
                LossKind::DistortionOnly => supcon_loss(&batch, LabelKind::Distortion, loss_cfg),
                LossKind::InfoNce => infonce_loss(&batch, loss_cfg),
            };
            let loss = match loss {
                Ok(out) => out,
                Err(Error::DegeneratePartition) => {
                    log::warn!("epoch {epoch}: skipping batch with degenerate label partition");
                    skipped_batches += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let grads = model.backward(&pass, &loss.gradient)?;
            optimizer.step(&mut model, &grads)?;
            epoch_loss += loss.value;
            batches += 1;
        }
        if batches == 0 {
            return Err(Error::invalid(
                "pretrain",
                format!("epoch {epoch} had no trainable batch"),
            ));
        }
        let mean = epoch_loss / batches as f64;
        log::info!("epoch {}/{}: mean loss {mean:.6}", epoch + 1, train_cfg.epochs);
        loss_curve.push(mean);
    }
    Ok(TrainResult {
        model,
        loss_curve,
        augmentation,
        skipped_batches,
    })
}

/// Fisher-Yates shuffle driven by the training stream.
fn shuffle(indices: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
}

fn assemble_views(
    pool: &PatchPool,
    chunk: &[usize],
    augmentation: &AugmentationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Array2<f64>, Vec<usize>, Vec<usize>, Vec<usize>)> {
    let dim = usize::from(pool.patch_height)
        * usize::from(pool.patch_width)
        * usize::from(pool.channels);
    let mut inputs = Array2::zeros((2 * chunk.len(), dim));
    let mut semantic = Vec::with_capacity(2 * chunk.len());
    let mut distortion = Vec::with_capacity(2 * chunk.len());
    let mut pairs = Vec::with_capacity(2 * chunk.len());
    for (k, &idx) in chunk.iter().enumerate() {
        let patch = &pool.patches[idx];
        let (v1, v2) = augment_pair(&patch.pixels, augmentation, rng)?;
        for (slot, view) in [(2 * k, v1), (2 * k + 1, v2)] {
            for (j, &v) in view.data().iter().enumerate() {
                inputs[[slot, j]] = v;
            }
            semantic.push(patch.semantic_class);
            distortion.push(patch.distortion_class);
            pairs.push(k);
        }
    }
    Ok((inputs, semantic, distortion, pairs))
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"FECK";
const CHECKPOINT_VERSION: u32 = 1;

/// Run metadata echoed into the checkpoint trailer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub temperature: f64,
    pub alpha: f64,
    pub seed: u64,
    pub loss_kind: String,
    /// Projection head layers are retained but downstream use reads the
    /// representation only.
    pub projection_discardable: bool,
    pub augmentation: AugmentationConfig,
}

/// Writes the checkpoint: magic, version, layer counts and dims, f64
/// little-endian parameter blobs, then the metadata as a text trailer.
pub fn save_checkpoint(path: &Path, model: &EncoderModel, meta: &CheckpointMeta) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.encoder_layers as u32).to_le_bytes());
    buf.extend_from_slice(&((model.layers.len() - model.encoder_layers) as u32).to_le_bytes());
    for layer in &model.layers {
        buf.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
        buf.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
    }
    for layer in &model.layers {
        for &v in layer.weights.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for &v in layer.bias.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let trailer = toml::to_string(meta)
        .map_err(|e| Error::Format(format!("checkpoint meta serialize: {e}")))?;
    buf.extend_from_slice(trailer.as_bytes());
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint written by [`save_checkpoint`]; forward passes on
/// the loaded model are bit-identical to the saved one.
pub fn load_checkpoint(path: &Path) -> Result<(EncoderModel, CheckpointMeta)> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut cursor = 0usize;
    let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
        let s = bytes
            .get(*cursor..*cursor + n)
            .ok_or_else(|| Error::Format("checkpoint truncated".to_string()))?;
        *cursor += n;
        Ok(s)
    };
    if take(&mut cursor, 4)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint file".to_string()));
    }
    let version = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let encoder_layers = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    let projection_layers = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    let total = encoder_layers + projection_layers;
    if encoder_layers == 0 || projection_layers == 0 || total > 64 {
        return Err(Error::Format("implausible checkpoint layer counts".to_string()));
    }
    let mut dims = Vec::with_capacity(total);
    for _ in 0..total {
        let in_dim = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        let out_dim = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        dims.push((in_dim, out_dim));
    }
    let mut layers = Vec::with_capacity(total);
    for &(in_dim, out_dim) in &dims {
        let mut weights = Vec::with_capacity(in_dim * out_dim);
        let raw = take(&mut cursor, in_dim * out_dim * 8)?;
        for chunk in raw.chunks_exact(8) {
            weights.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        let mut bias = Vec::with_capacity(out_dim);
        let raw = take(&mut cursor, out_dim * 8)?;
        for chunk in raw.chunks_exact(8) {
            bias.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        layers.push(AffineLayer {
            weights: Array2::from_shape_vec((out_dim, in_dim), weights)
                .map_err(|e| Error::Format(format!("weight blob shape: {e}")))?,
            bias: Array1::from_vec(bias),
        });
    }
    let trailer = std::str::from_utf8(&bytes[cursor..])
        .map_err(|_| Error::Format("checkpoint trailer is not UTF-8".to_string()))?;
    let meta: CheckpointMeta = toml::from_str(trailer)
        .map_err(|e| Error::Format(format!("checkpoint trailer: {e}")))?;

    let mut relu_after = Vec::with_capacity(total);
    for l in 0..total {
        let is_repr = l == encoder_layers - 1;
        let is_output = l == total - 1;
        relu_after.push(!is_repr && !is_output);
    }
    let model = EncoderModel {
        layers,
        relu_after,
        encoder_layers,
    };
    Ok((model, meta))
}

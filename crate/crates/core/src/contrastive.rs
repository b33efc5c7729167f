//! Supervised contrastive objectives over semantic and distortion-class
//! labels, their alpha-weighted combination, and a view-pair InfoNCE
//! baseline. Values and analytic gradients are computed at 64-bit
//! precision with max-shifted log-sum-exp; raw exponential sums are never
//! materialized.
//!
//! For anchor `i` with positive set `P(i)` and `A(i)` = batch minus `i`:
//!
//! ```text
//! loss_i = -1/|P(i)| sum_{p in P(i)} log( exp(z_i.z_p / tau)
//!                                        / sum_{a in A(i)} exp(z_i.z_a / tau) )
//! ```
//!
//! Anchors with empty positive sets are excluded from the outer mean
//! rather than counted as zero-loss terms. The outer aggregation is the
//! mean over contributing anchors, which keeps values comparable across
//! batch sizes and only rescales gradients relative to a sum.

use ndarray::Array2;

use crate::error::{Error, Result};

/// A batch of l2-normalized embeddings with the label fields the losses
/// partition on. View pairing is optional: batches assembled from
/// two-view augmentation carry it, label-only batches may omit it.
#[derive(Debug, Clone)]
pub struct EmbeddingBatch {
    vectors: Array2<f64>,
    semantic_labels: Vec<usize>,
    distortion_labels: Vec<usize>,
    view_pairs: Option<Vec<usize>>,
}

impl EmbeddingBatch {
    /// Builds a batch, re-normalizing every row to unit length. Loss
    /// values are therefore invariant to pre-normalization scaling of
    /// the input vectors.
    pub fn new(
        vectors: Array2<f64>,
        semantic_labels: Vec<usize>,
        distortion_labels: Vec<usize>,
    ) -> Result<Self> {
        let rows = vectors.nrows();
        if rows == 0 {
            return Err(Error::Shape("empty embedding batch".to_string()));
        }
        if semantic_labels.len() != rows || distortion_labels.len() != rows {
            return Err(Error::Shape(format!(
                "{} rows with {} semantic / {} distortion labels",
                rows,
                semantic_labels.len(),
                distortion_labels.len()
            )));
        }
        let mut vectors = vectors;
        for mut row in vectors.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if !norm.is_finite() || norm < 1e-12 {
                return Err(Error::invalid(
                    "embedding batch",
                    "row with zero or non-finite norm cannot be normalized",
                ));
            }
            row.mapv_inplace(|v| v / norm);
        }
        Ok(Self {
            vectors,
            semantic_labels,
            distortion_labels,
            view_pairs: None,
        })
    }

    /// Attaches the two-view pairing: `view_pairs[i]` identifies the
    /// augmentation pair, so each value must appear exactly twice and the
    /// batch size must be even.
    pub fn with_view_pairs(mut self, view_pairs: Vec<usize>) -> Result<Self> {
        let rows = self.vectors.nrows();
        if view_pairs.len() != rows {
            return Err(Error::Shape(format!(
                "{rows} rows with {} view pair entries",
                view_pairs.len()
            )));
        }
        if rows % 2 != 0 {
            return Err(Error::invalid(
                "embedding batch",
                "view-paired batch size must be even",
            ));
        }
        let mut counts = std::collections::HashMap::new();
        for &p in &view_pairs {
            *counts.entry(p).or_insert(0usize) += 1;
        }
        if counts.values().any(|&c| c != 2) {
            return Err(Error::invalid(
                "embedding batch",
                "every view pair id must appear exactly twice",
            ));
        }
        self.view_pairs = Some(view_pairs);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn semantic_labels(&self) -> &[usize] {
        &self.semantic_labels
    }

    pub fn distortion_labels(&self) -> &[usize] {
        &self.distortion_labels
    }

    pub fn view_pairs(&self) -> Option<&[usize]> {
        self.view_pairs.as_deref()
    }
}

/// Which label field a supervised contrastive loss partitions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    Semantic,
    Distortion,
}

/// Temperature and combination weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub temperature: f64,
    /// Weight of the distortion-class term in the combined loss:
    /// `total = alpha * L_distortion + (1 - alpha) * L_semantic`.
    pub alpha: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            temperature: 0.07,
            alpha: 0.5,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !self.alpha.is_finite() {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Loss value and its gradient with respect to the normalized embedding
/// rows.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub gradient: Array2<f64>,
}

/// Pairwise dot products of the normalized rows. The diagonal is present
/// here but excluded from every softmax denominator downstream.
pub fn similarity_matrix(batch: &EmbeddingBatch) -> Array2<f64> {
    batch.vectors.dot(&batch.vectors.t())
}

fn positives_from_labels(labels: &[usize]) -> Vec<Vec<usize>> {
    let n = labels.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && labels[j] == labels[i])
                .collect()
        })
        .collect()
}

/// Shared core: supervised contrastive loss for explicit positive sets.
fn supcon_core(batch: &EmbeddingBatch, positives: &[Vec<usize>], tau: f64) -> Result<LossOutput> {
    let n = batch.len();
    let sims = similarity_matrix(batch);
    let contributors: Vec<usize> = (0..n).filter(|&i| !positives[i].is_empty()).collect();
    if contributors.is_empty() {
        return Err(Error::DegeneratePartition);
    }
    let m = contributors.len() as f64;

    let mut value = 0.0;
    // coeff[i][j] accumulates d(loss)/d(sims[i][j]) without the 1/m factor.
    let mut coeff = Array2::<f64>::zeros((n, n));
    for &i in &contributors {
        // Max-shifted log-sum-exp over A(i) = batch minus i.
        let row = sims.row(i);
        let mut max_logit = f64::NEG_INFINITY;
        for j in 0..n {
            if j != i {
                max_logit = max_logit.max(row[j] / tau);
            }
        }
        let mut denom = 0.0;
        for j in 0..n {
            if j != i {
                denom += ((row[j] / tau) - max_logit).exp();
            }
        }
        let lse = max_logit + denom.ln();

        let p_count = positives[i].len() as f64;
        let mut mean_pos_logit = 0.0;
        for &p in &positives[i] {
            mean_pos_logit += row[p] / tau;
        }
        mean_pos_logit /= p_count;
        value += lse - mean_pos_logit;

        for j in 0..n {
            if j != i {
                let softmax = (((row[j] / tau) - max_logit).exp()) / denom;
                coeff[[i, j]] += softmax / tau;
            }
        }
        for &p in &positives[i] {
            coeff[[i, p]] -= 1.0 / (p_count * tau);
        }
    }
    value /= m;

    // d(loss)/d(z) = (coeff + coeff^T) . Z / m, since sims[i][j] depends on
    // both rows i and j.
    let symmetric = &coeff + &coeff.t();
    let gradient = symmetric.dot(&batch.vectors) / m;
    Ok(LossOutput { value, gradient })
}

/// Supervised contrastive loss partitioned on the selected label field.
///
/// Errors with a degenerate-partition diagnosis when no anchor has any
/// positive under the labels.
pub fn supcon_loss(batch: &EmbeddingBatch, labels: LabelKind, cfg: &LossConfig) -> Result<LossOutput> {
    cfg.validate()?;
    let labels = match labels {
        LabelKind::Semantic => &batch.semantic_labels,
        LabelKind::Distortion => &batch.distortion_labels,
    };
    supcon_core(batch, &positives_from_labels(labels), cfg.temperature)
}

/// Alpha-weighted combination of the distortion-label and semantic-label
/// supervised contrastive losses. A term with weight exactly 0 is never
/// evaluated, so its partition may be degenerate.
pub fn combined_loss(batch: &EmbeddingBatch, cfg: &LossConfig) -> Result<LossOutput> {
    cfg.validate()?;
    if cfg.alpha == 0.0 {
        let semantic = supcon_loss(batch, LabelKind::Semantic, cfg)?;
        return Ok(LossOutput {
            value: 1.0 * semantic.value,
            gradient: semantic.gradient,
        });
    }
    if cfg.alpha == 1.0 {
        return supcon_loss(batch, LabelKind::Distortion, cfg);
    }
    let distortion = supcon_loss(batch, LabelKind::Distortion, cfg)?;
    let semantic = supcon_loss(batch, LabelKind::Semantic, cfg)?;
    let value = cfg.alpha * distortion.value + (1.0 - cfg.alpha) * semantic.value;
    let gradient = cfg.alpha * &distortion.gradient + (1.0 - cfg.alpha) * &semantic.gradient;
    Ok(LossOutput { value, gradient })
}

/// Self-supervised InfoNCE baseline: the only positive for each anchor is
/// its paired augmented view.
pub fn infonce_loss(batch: &EmbeddingBatch, cfg: &LossConfig) -> Result<LossOutput> {
    cfg.validate()?;
    let pairs = batch.view_pairs().ok_or_else(|| {
        Error::invalid("info-nce", "batch carries no view pairing")
    })?;
    let n = batch.len();
    let mut positives = vec![Vec::with_capacity(1); n];
    for i in 0..n {
        for j in 0..n {
            if j != i && pairs[j] == pairs[i] {
                positives[i].push(j);
            }
        }
    }
    supcon_core(batch, &positives, cfg.temperature)
}

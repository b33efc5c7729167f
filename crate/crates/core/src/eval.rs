//! Frozen-representation evaluation: linear and kNN probes, the
//! center/edge accuracy gap, embedding-geometry metrics, and the alpha
//! sweep harness.
//!
//! Probes read the encoder representation r, not the projection output z,
//! mirroring the convention that the projection head is discarded after
//! pre-training.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use crate::contrastive::LossConfig;
use crate::dataset::PatchPool;
use crate::error::{Error, Result};
use crate::model::{
    normalize_patch, pretrain, AugmentationConfig, EncoderModel, LossKind, ModelConfig,
    TrainConfig, TrainResult,
};
use crate::seeding::stream_rng;

/// Features plus labels for a probe split. `levels` carries the
/// distortion level of each row (0 = center, >0 = edge) for the gap
/// report.
#[derive(Debug, Clone)]
pub struct ProbeData {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub levels: Vec<u8>,
}

impl ProbeData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Patch-classification report from a frozen-representation probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub overall_accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub center_accuracy: f64,
    pub edge_accuracy: f64,
    /// center_accuracy - edge_accuracy on the same model.
    pub gap: f64,
}

/// Multinomial logistic regression on frozen features, trained by
/// full-batch gradient descent from a deterministic zero initialization.
/// Returns the report on the test split and the training loss trace.
pub fn linear_probe(
    train: &ProbeData,
    test: &ProbeData,
    num_classes: usize,
    epochs: usize,
    lr: f64,
) -> Result<(ProbeReport, Vec<f64>)> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("probe", "empty train or test split"));
    }
    let distinct: std::collections::BTreeSet<usize> = train.labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::invalid("probe", "train split has a single class"));
    }
    if train.labels.iter().chain(&test.labels).any(|&c| c >= num_classes) {
        return Err(Error::invalid("probe", "label outside class range"));
    }
    let dim = train.features.ncols();
    let n = train.len();
    // Weights (C x D) and bias (C), zero-initialized.
    let mut weights = Array2::<f64>::zeros((num_classes, dim));
    let mut bias = Array1::<f64>::zeros(num_classes);
    let mut losses = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let logits = train.features.dot(&weights.t()) + &bias;
        // Row-wise softmax with max shift.
        let mut probs = logits;
        let mut loss = 0.0;
        for (i, mut row) in probs.rows_mut().into_iter().enumerate() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                denom += *v;
            }
            for v in row.iter_mut() {
                *v /= denom;
            }
            loss -= row[train.labels[i]].max(1e-300).ln();
        }
        loss /= n as f64;
        losses.push(loss);
        // Gradient: (P - Y)^T X / n.
        for (i, &label) in train.labels.iter().enumerate() {
            probs[[i, label]] -= 1.0;
        }
        let grad_w = probs.t().dot(&train.features) / n as f64;
        let grad_b = probs.sum_axis(Axis(0)) / n as f64;
        weights.scaled_add(-lr, &grad_w);
        bias.scaled_add(-lr, &grad_b);
    }

    let logits = test.features.dot(&weights.t()) + &bias;
    let predictions: Vec<usize> = logits
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
                .map(|(i, _)| i)
                .expect("nonempty row")
        })
        .collect();
    Ok((
        report_from_predictions(&predictions, &test.labels, &test.levels, num_classes),
        losses,
    ))
}

fn report_from_predictions(
    predictions: &[usize],
    labels: &[usize],
    levels: &[u8],
    num_classes: usize,
) -> ProbeReport {
    let mut correct = 0usize;
    let mut class_total = vec![0usize; num_classes];
    let mut class_correct = vec![0usize; num_classes];
    let (mut center_total, mut center_correct) = (0usize, 0usize);
    let (mut edge_total, mut edge_correct) = (0usize, 0usize);
    for ((&pred, &label), &level) in predictions.iter().zip(labels).zip(levels) {
        let hit = pred == label;
        correct += usize::from(hit);
        class_total[label] += 1;
        class_correct[label] += usize::from(hit);
        if level == 0 {
            center_total += 1;
            center_correct += usize::from(hit);
        } else {
            edge_total += 1;
            edge_correct += usize::from(hit);
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let center_accuracy = ratio(center_correct, center_total);
    let edge_accuracy = ratio(edge_correct, edge_total);
    ProbeReport {
        overall_accuracy: ratio(correct, labels.len()),
        per_class_accuracy: (0..num_classes)
            .map(|c| ratio(class_correct[c], class_total[c]))
            .collect(),
        center_accuracy,
        edge_accuracy,
        gap: center_accuracy - edge_accuracy,
    }
}

/// Leave-one-out cosine-similarity kNN accuracy. Neighbors are ranked by
/// descending similarity with index order breaking exact ties; vote ties
/// go to the class of the best-ranked neighbor among the tied classes.
pub fn knn_probe(embeddings: &Array2<f64>, labels: &[usize], k: usize) -> Result<f64> {
    let n = embeddings.nrows();
    if labels.len() != n {
        return Err(Error::Shape("label count mismatch".into()));
    }
    if n < k + 1 || k == 0 {
        return Err(Error::invalid("knn", format!("need more than k={k} points, have {n}")));
    }
    let norms: Vec<f64> = embeddings
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .collect();
    let correct: usize = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut sims: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dot = embeddings.row(i).dot(&embeddings.row(j));
                    (dot / (norms[i] * norms[j]), j)
                })
                .collect();
            sims.sort_by(|a, b| {
                b.0.partial_cmp(&a.0)
                    .expect("finite similarity")
                    .then(a.1.cmp(&b.1))
            });
            let vote = majority_vote(&sims[..k], labels);
            usize::from(vote == labels[i])
        })
        .sum();
    Ok(correct as f64 / n as f64)
}

/// Majority vote over ranked neighbors; ties resolved by the earliest
/// ranked neighbor among the tied classes.
fn majority_vote(ranked: &[(f64, usize)], labels: &[usize]) -> usize {
    let mut counts: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for &(_, j) in ranked {
        *counts.entry(labels[j]).or_insert(0) += 1;
    }
    let best = *counts.values().max().expect("nonempty");
    let tied: std::collections::BTreeSet<usize> = counts
        .into_iter()
        .filter(|&(_, c)| c == best)
        .map(|(class, _)| class)
        .collect();
    ranked
        .iter()
        .map(|&(_, j)| labels[j])
        .find(|c| tied.contains(c))
        .expect("some tied class appears in ranking")
}

/// Embedding-geometry summary over unit-norm embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    /// Mean squared distance between same-semantic-class pairs.
    pub alignment: f64,
    /// log of the mean Gaussian-kernel similarity exp(-2 ||zi - zj||^2)
    /// over all distinct pairs.
    pub uniformity: f64,
    /// Mean embedding per (class, level) group.
    pub centroids: Vec<((usize, u8), Vec<f64>)>,
    /// Pairwise distances between group centroids.
    pub centroid_distances: Vec<((usize, u8), (usize, u8), f64)>,
}

/// Alignment/uniformity metrics and per-(class, level) centroid geometry.
pub fn geometry_metrics(
    embeddings: &Array2<f64>,
    semantic: &[usize],
    levels: &[u8],
) -> Result<GeometryReport> {
    let n = embeddings.nrows();
    if n == 0 {
        return Err(Error::invalid("geometry", "no embeddings"));
    }
    if semantic.len() != n || levels.len() != n {
        return Err(Error::Shape("geometry label count mismatch".into()));
    }
    let mut align_sum = 0.0;
    let mut align_pairs = 0usize;
    let mut uniform_sum = 0.0;
    let mut uniform_pairs = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = &embeddings.row(i) - &embeddings.row(j);
            let dist_sq = diff.dot(&diff);
            if semantic[i] == semantic[j] {
                align_sum += dist_sq;
                align_pairs += 1;
            }
            uniform_sum += (-2.0 * dist_sq).exp();
            uniform_pairs += 1;
        }
    }
    let alignment = if align_pairs > 0 {
        align_sum / align_pairs as f64
    } else {
        0.0
    };
    let uniformity = if uniform_pairs > 0 {
        (uniform_sum / uniform_pairs as f64).ln()
    } else {
        0.0
    };

    let mut groups: std::collections::BTreeMap<(usize, u8), (Vec<f64>, usize)> =
        std::collections::BTreeMap::new();
    let dim = embeddings.ncols();
    for i in 0..n {
        let entry = groups
            .entry((semantic[i], levels[i]))
            .or_insert_with(|| (vec![0.0; dim], 0));
        for (s, v) in entry.0.iter_mut().zip(embeddings.row(i)) {
            *s += v;
        }
        entry.1 += 1;
    }
    let centroids: Vec<((usize, u8), Vec<f64>)> = groups
        .into_iter()
        .map(|(key, (sum, count))| {
            (key, sum.into_iter().map(|v| v / count as f64).collect())
        })
        .collect();
    let mut centroid_distances = Vec::new();
    for a in 0..centroids.len() {
        for b in (a + 1)..centroids.len() {
            let dist = centroids[a]
                .1
                .iter()
                .zip(&centroids[b].1)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            centroid_distances.push((centroids[a].0, centroids[b].0, dist));
        }
    }
    Ok(GeometryReport {
        alignment,
        uniformity,
        centroids,
        centroid_distances,
    })
}

/// Frozen features of a whole pool under a trained (or random) encoder:
/// representations and embeddings of the normalized, un-augmented
/// patches.
pub struct PoolEmbeddings {
    pub representations: Array2<f64>,
    pub embeddings: Array2<f64>,
    pub labels: Vec<usize>,
    pub levels: Vec<u8>,
}

pub fn embed_pool(
    model: &EncoderModel,
    pool: &PatchPool,
    augmentation: &AugmentationConfig,
) -> Result<PoolEmbeddings> {
    if pool.is_empty() {
        return Err(Error::invalid("embed", "empty pool"));
    }
    let dim = usize::from(pool.patch_height)
        * usize::from(pool.patch_width)
        * usize::from(pool.channels);
    let mut representations = Array2::zeros((pool.len(), model.representation_dim()));
    let mut embeddings = Array2::zeros((pool.len(), model.embedding_dim()));
    for (chunk_start, chunk) in pool.patches.chunks(256).enumerate().map(|(c, ch)| (c * 256, ch)) {
        let mut inputs = Array2::zeros((chunk.len(), dim));
        for (row, patch) in chunk.iter().enumerate() {
            for (col, v) in normalize_patch(&patch.pixels, augmentation).into_iter().enumerate() {
                inputs[[row, col]] = v;
            }
        }
        let pass = model.forward(&inputs)?;
        for (row, _) in chunk.iter().enumerate() {
            representations
                .row_mut(chunk_start + row)
                .assign(&pass.representations.row(row));
            embeddings
                .row_mut(chunk_start + row)
                .assign(&pass.embeddings.row(row));
        }
    }
    Ok(PoolEmbeddings {
        representations,
        embeddings,
        labels: pool.patches.iter().map(|p| p.semantic_class).collect(),
        levels: pool.patches.iter().map(|p| p.distortion_level).collect(),
    })
}

/// Deterministic train/test split of pool indices by seeded shuffle.
pub fn probe_split(pool_len: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut indices: Vec<usize> = (0..pool_len).collect();
    let mut rng = stream_rng(seed, "probe-split", 0);
    use rand::Rng;
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
    let cut = ((pool_len as f64) * train_fraction).round() as usize;
    let cut = cut.clamp(1, pool_len.saturating_sub(1).max(1));
    let (train, test) = indices.split_at(cut.min(indices.len()));
    (train.to_vec(), test.to_vec())
}

/// Slices pool embeddings into a probe split.
pub fn probe_data_from(embedded: &PoolEmbeddings, indices: &[usize]) -> ProbeData {
    let dim = embedded.representations.ncols();
    let mut features = Array2::zeros((indices.len(), dim));
    let mut labels = Vec::with_capacity(indices.len());
    let mut levels = Vec::with_capacity(indices.len());
    for (row, &idx) in indices.iter().enumerate() {
        features.row_mut(row).assign(&embedded.representations.row(idx));
        labels.push(embedded.labels[idx]);
        levels.push(embedded.levels[idx]);
    }
    ProbeData {
        features,
        labels,
        levels,
    }
}

/// Probe settings shared by the `probe` and `sweep` paths.
#[derive(Debug, Clone, Copy)]
pub struct ProbeConfig {
    pub train_fraction: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub split_seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            epochs: 300,
            learning_rate: 0.5,
            split_seed: 7,
        }
    }
}

/// Runs the standard probe on a trained encoder over a pool.
pub fn probe_model(
    model: &EncoderModel,
    pool: &PatchPool,
    augmentation: &AugmentationConfig,
    cfg: &ProbeConfig,
) -> Result<ProbeReport> {
    let embedded = embed_pool(model, pool, augmentation)?;
    let (train_idx, test_idx) = probe_split(pool.len(), cfg.train_fraction, cfg.split_seed);
    let train = probe_data_from(&embedded, &train_idx);
    let test = probe_data_from(&embedded, &test_idx);
    let (report, _) = linear_probe(
        &train,
        &test,
        usize::from(pool.num_classes),
        cfg.epochs,
        cfg.learning_rate,
    )?;
    Ok(report)
}

/// One row of the alpha sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub alpha: f64,
    pub probe_accuracy: f64,
    pub gap: f64,
    pub alignment: f64,
    pub uniformity: f64,
    pub final_loss: f64,
    pub loss_curve: Vec<f64>,
}

/// Trains one model per alpha under identical seeds and data, probes each
/// frozen representation, and reports geometry metrics.
///
/// Independent runs execute in parallel; the output preserves the input
/// alpha order.
pub fn alpha_sweep(
    pool: &PatchPool,
    alphas: &[f64],
    model_cfg: &ModelConfig,
    base_loss: &LossConfig,
    train_cfg: &TrainConfig,
    probe_cfg: &ProbeConfig,
) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() {
        return Err(Error::invalid("sweep", "no alpha values"));
    }
    if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::invalid("sweep", "alpha outside [0, 1]"));
    }
    alphas
        .par_iter()
        .map(|&alpha| {
            let loss_cfg = LossConfig {
                alpha,
                ..*base_loss
            };
            let TrainResult {
                model,
                loss_curve,
                augmentation,
                ..
            } = pretrain(pool, model_cfg, &loss_cfg, train_cfg, LossKind::Combined)?;
            let report = probe_model(&model, pool, &augmentation, probe_cfg)?;
            let embedded = embed_pool(&model, pool, &augmentation)?;
            let geometry = geometry_metrics(&embedded.embeddings, &embedded.labels, &embedded.levels)?;
            Ok(SweepRow {
                alpha,
                probe_accuracy: report.overall_accuracy,
                gap: report.gap,
                alignment: geometry.alignment,
                uniformity: geometry.uniformity,
                final_loss: *loss_curve.last().expect("nonempty curve"),
                loss_curve,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn linear_probe_separates_linearly_separable_classes() {
        let mut features = Array2::zeros((40, 2));
        let mut labels = Vec::new();
        for i in 0..40 {
            let class = i % 2;
            let offset = if class == 0 { -1.0 } else { 1.0 };
            features[[i, 0]] = offset + 0.1 * ((i / 2) as f64 / 20.0 - 0.5);
            features[[i, 1]] = 0.3 * offset;
            labels.push(class);
        }
        let levels = vec![0u8; 40];
        let data = ProbeData {
            features: features.clone(),
            labels: labels.clone(),
            levels: levels.clone(),
        };
        let (report, losses) = linear_probe(&data, &data, 2, 200, 0.5).unwrap();
        assert_eq!(report.overall_accuracy, 1.0);
        assert!(losses.first().unwrap() > losses.last().unwrap());
    }

    #[test]
    fn linear_probe_loss_non_increasing_at_small_lr() {
        let mut features = Array2::zeros((30, 3));
        let mut labels = Vec::new();
        let mut rng = stream_rng(3, "probe-test", 0);
        use rand::Rng;
        for i in 0..30 {
            for j in 0..3 {
                features[[i, j]] = rng.random_range(-1.0..1.0);
            }
            labels.push(i % 3);
        }
        let data = ProbeData {
            features,
            labels,
            levels: vec![0; 30],
        };
        let (_, losses) = linear_probe(&data, &data, 3, 100, 0.01).unwrap();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn shuffled_labels_probe_at_chance_level() {
        // Labels decorrelated from the features: test accuracy sits at
        // 1/C within a 3-sigma binomial band.
        use rand::Rng;
        let mut rng = stream_rng(7, "probe-chance", 0);
        let num_classes = 4;
        let n_train = 400;
        let n_test = 400;
        let make = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| ProbeData {
            features: Array2::from_shape_fn((n, 6), |_| rng.random_range(-1.0..1.0)),
            labels: (0..n).map(|_| rng.random_range(0..num_classes)).collect(),
            levels: vec![0; n],
        };
        let train = make(&mut rng, n_train);
        let test = make(&mut rng, n_test);
        let (report, _) = linear_probe(&train, &test, num_classes, 100, 0.1).unwrap();
        let p = 1.0 / num_classes as f64;
        let sigma = (p * (1.0 - p) / n_test as f64).sqrt();
        assert!(
            (report.overall_accuracy - p).abs() <= 3.0 * sigma,
            "accuracy {} vs chance {p} (3 sigma {})",
            report.overall_accuracy,
            3.0 * sigma
        );
    }

    #[test]
    fn linear_probe_rejects_single_class_train() {
        let data = ProbeData {
            features: Array2::zeros((4, 2)),
            labels: vec![1; 4],
            levels: vec![0; 4],
        };
        assert!(linear_probe(&data, &data, 3, 10, 0.1).is_err());
    }

    #[test]
    fn probe_gap_is_center_minus_edge() {
        // Predictions engineered so center and edge accuracies differ.
        let predictions = vec![0, 0, 1, 1];
        let labels = vec![0, 0, 0, 1];
        let levels = vec![0, 0, 1, 1];
        let report = report_from_predictions(&predictions, &labels, &levels, 2);
        assert_eq!(report.center_accuracy, 1.0);
        assert_eq!(report.edge_accuracy, 0.5);
        assert_eq!(report.gap, report.center_accuracy - report.edge_accuracy);
    }

    #[test]
    fn knn_perfect_clusters_score_one() {
        let mut features = Array2::zeros((20, 3));
        let mut labels = Vec::new();
        for i in 0..20 {
            let class = i % 2;
            features[[i, class]] = 1.0;
            features[[i, 2]] = 0.01 * (i as f64 / 20.0);
            labels.push(class);
        }
        let acc = knn_probe(&features, &labels, 5).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn knn_antipodal_singletons_score_zero() {
        let features = array![[1.0, 0.0], [-1.0, 0.0]];
        let labels = vec![0, 1];
        let acc = knn_probe(&features, &labels, 1).unwrap();
        assert_eq!(acc, 0.0);
    }

    #[test]
    fn knn_matches_independent_quadratic_oracle() {
        use rand::Rng;
        let mut rng = stream_rng(17, "knn-test", 0);
        let n = 50;
        let features = Array2::from_shape_fn((n, 4), |_| rng.random_range(-1.0..1.0));
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        for k in [1, 3, 5] {
            let fast = knn_probe(&features, &labels, k).unwrap();
            let oracle = brute_force_knn(&features, &labels, k);
            assert_eq!(fast, oracle, "k = {k}");
        }
    }

    /// Independent selection path: repeated max-scan instead of sorting.
    fn brute_force_knn(features: &Array2<f64>, labels: &[usize], k: usize) -> f64 {
        let n = features.nrows();
        let norms: Vec<f64> = (0..n)
            .map(|i| features.row(i).dot(&features.row(i)).sqrt())
            .collect();
        let mut correct = 0;
        for i in 0..n {
            let mut taken = vec![false; n];
            taken[i] = true;
            let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(k);
            for _ in 0..k {
                let mut best: Option<(f64, usize)> = None;
                for j in 0..n {
                    if taken[j] {
                        continue;
                    }
                    let sim = features.row(i).dot(&features.row(j)) / (norms[i] * norms[j]);
                    best = match best {
                        None => Some((sim, j)),
                        Some((bs, bj)) => {
                            if sim > bs || (sim == bs && j < bj) {
                                Some((sim, j))
                            } else {
                                Some((bs, bj))
                            }
                        }
                    };
                }
                let (sim, j) = best.expect("enough points");
                taken[j] = true;
                ranked.push((sim, j));
            }
            let vote = super::majority_vote(&ranked, labels);
            correct += usize::from(vote == labels[i]);
        }
        correct as f64 / n as f64
    }

    #[test]
    fn geometry_identical_embeddings_align_perfectly() {
        let features = Array2::from_elem((4, 3), 1.0 / 3.0f64.sqrt());
        let report = geometry_metrics(&features, &[0, 0, 0, 0], &[0, 0, 0, 0]).unwrap();
        assert_eq!(report.alignment, 0.0);
        assert!(report.uniformity.abs() < 1e-12);
    }

    #[test]
    fn geometry_antipodal_pair_closed_form() {
        let features = array![[1.0, 0.0], [-1.0, 0.0]];
        let report = geometry_metrics(&features, &[0, 0], &[0, 1]).unwrap();
        assert!((report.alignment - 4.0).abs() < 1e-12);
        assert!((report.uniformity - (-8.0)).abs() < 1e-12);
        assert_eq!(report.centroid_distances.len(), 1);
        assert!((report.centroid_distances[0].2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_matches_brute_force_pairwise_oracle() {
        use rand::Rng;
        let mut rng = stream_rng(23, "geom-test", 0);
        let n = 20;
        let mut features: Array2<f64> =
            Array2::from_shape_fn((n, 5), |_| rng.random_range(-1.0..1.0));
        for mut row in features.rows_mut() {
            let norm = row.dot(&row).sqrt();
            row.mapv_inplace(|v| v / norm);
        }
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let levels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let report = geometry_metrics(&features, &labels, &levels).unwrap();

        let mut align = (0.0, 0usize);
        let mut uniform = (0.0, 0usize);
        for i in 0..n {
            for j in 0..n {
                if i >= j {
                    continue;
                }
                let mut d = 0.0;
                for c in 0..5 {
                    let diff = features[[i, c]] - features[[j, c]];
                    d += diff * diff;
                }
                if labels[i] == labels[j] {
                    align.0 += d;
                    align.1 += 1;
                }
                uniform.0 += (-2.0 * d).exp();
                uniform.1 += 1;
            }
        }
        assert!((report.alignment - align.0 / align.1 as f64).abs() < 1e-10);
        assert!((report.uniformity - (uniform.0 / uniform.1 as f64).ln()).abs() < 1e-10);
    }

    #[test]
    fn geometry_invariant_to_row_permutation() {
        use rand::Rng;
        let mut rng = stream_rng(29, "geom-perm", 0);
        let n = 12;
        let features = Array2::from_shape_fn((n, 4), |_| rng.random_range(-1.0..1.0));
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let levels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let base = geometry_metrics(&features, &labels, &levels).unwrap();

        let perm: Vec<usize> = (0..n).rev().collect();
        let permuted = Array2::from_shape_fn((n, 4), |(i, j)| features[[perm[i], j]]);
        let plabels: Vec<usize> = perm.iter().map(|&p| labels[p]).collect();
        let plevels: Vec<u8> = perm.iter().map(|&p| levels[p]).collect();
        let out = geometry_metrics(&permuted, &plabels, &plevels).unwrap();
        assert!((out.alignment - base.alignment).abs() < 1e-12);
        assert!((out.uniformity - base.uniformity).abs() < 1e-12);
    }

    #[test]
    fn probe_split_is_deterministic_and_disjoint() {
        let (train_a, test_a) = probe_split(100, 0.8, 5);
        let (train_b, test_b) = probe_split(100, 0.8, 5);
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
        assert_eq!(train_a.len(), 80);
        let mut all: Vec<usize> = train_a.iter().chain(&test_a).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }
}

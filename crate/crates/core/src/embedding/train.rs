//! Triplet training loop: seeded batch composition, online mining, manual
//! backprop and Adam with bias correction. Everything is deterministic for
//! a fixed (dataset, config, seed).

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::augment::{augment, AugmentConfig, AugmentError};
use super::loss::{accumulate_triplet_grad, mine_semi_hard};
use super::mlp::{EmbeddingModel, Layer, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Number of views sampled per label when composing a batch; labels with
    /// fewer views are sampled with replacement.
    pub views_per_label: usize,
    pub augmentation: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 0.001,
            batch_size: 64,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            views_per_label: 4,
            augmentation: AugmentConfig::none(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::BadConfig {
                detail: "epochs must be >= 1".to_string(),
            });
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrainError::BadConfig {
                detail: "learning_rate must be positive".to_string(),
            });
        }
        if self.batch_size == 0 || self.views_per_label == 0 {
            return Err(TrainError::BadConfig {
                detail: "batch_size and views_per_label must be positive".to_string(),
            });
        }
        Ok(())
    }
}

/// Labeled view descriptors; views of visually identical instances share a
/// label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetItem {
    pub descriptor: Vec<f64>,
    pub label: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletDataset {
    items: Vec<DatasetItem>,
}

impl TripletDataset {
    /// Requires at least two labels and at least two items per label, so
    /// every label has an anchor-positive pair and every anchor a negative.
    pub fn new(items: Vec<DatasetItem>) -> Result<Self, TrainError> {
        let mut per_label: BTreeMap<u32, usize> = BTreeMap::new();
        let mut dim: Option<usize> = None;
        for item in &items {
            *per_label.entry(item.label).or_insert(0) += 1;
            match dim {
                None => dim = Some(item.descriptor.len()),
                Some(d) if d != item.descriptor.len() => {
                    return Err(TrainError::BadDataset {
                        detail: "descriptor lengths differ".to_string(),
                    })
                }
                _ => {}
            }
            if item.descriptor.iter().any(|v| !v.is_finite()) {
                return Err(TrainError::BadDataset {
                    detail: "non-finite descriptor entry".to_string(),
                });
            }
        }
        if per_label.len() < 2 {
            return Err(TrainError::BadDataset {
                detail: format!("need at least 2 labels, got {}", per_label.len()),
            });
        }
        if let Some((label, n)) = per_label.iter().find(|(_, &n)| n < 2) {
            return Err(TrainError::BadDataset {
                detail: format!("label {label} has {n} item(s), need at least 2"),
            });
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[DatasetItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<u32> {
        let mut labels: Vec<u32> = self.items.iter().map(|i| i.label).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    pub fn descriptor_dim(&self) -> usize {
        self.items.first().map_or(0, |i| i.descriptor.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    BadConfig { detail: String },
    BadDataset { detail: String },
    Model(ModelError),
    Augment(AugmentError),
    /// Loss went non-finite; surfaced instead of silently producing NaN.
    Diverged { epoch: usize },
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::BadConfig { detail } => write!(f, "invalid training config: {detail}"),
            TrainError::BadDataset { detail } => write!(f, "invalid dataset: {detail}"),
            TrainError::Model(e) => write!(f, "model error: {e}"),
            TrainError::Augment(e) => write!(f, "augmentation error: {e}"),
            TrainError::Diverged { epoch } => {
                write!(f, "training diverged at epoch {epoch} (non-finite loss)")
            }
        }
    }
}

impl std::error::Error for TrainError {}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        TrainError::Model(e)
    }
}

impl From<AugmentError> for TrainError {
    fn from(e: AugmentError) -> Self {
        TrainError::Augment(e)
    }
}

/// One row of the training curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Mined triplets over anchor-positive pairs examined this epoch.
    pub active_triplet_fraction: f64,
}

struct AdamState {
    m: Vec<Layer>,
    v: Vec<Layer>,
    step: u64,
}

impl AdamState {
    fn new(model: &EmbeddingModel) -> Self {
        let zeros: Vec<Layer> = model
            .layers()
            .iter()
            .map(|l| Layer {
                weights: vec![0.0; l.weights.len()],
                bias: vec![0.0; l.bias.len()],
            })
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    fn apply(&mut self, model: &mut EmbeddingModel, grads: &super::mlp::Gradients, cfg: &TrainConfig) {
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - cfg.adam_beta1.powi(t);
        let bias2 = 1.0 - cfg.adam_beta2.powi(t);
        for (l, layer) in model.layers_mut().iter_mut().enumerate() {
            let g = &grads.layers[l];
            let m = &mut self.m[l];
            let v = &mut self.v[l];
            for i in 0..layer.weights.len() {
                m.weights[i] = cfg.adam_beta1 * m.weights[i] + (1.0 - cfg.adam_beta1) * g.weights[i];
                v.weights[i] =
                    cfg.adam_beta2 * v.weights[i] + (1.0 - cfg.adam_beta2) * g.weights[i] * g.weights[i];
                let m_hat = m.weights[i] / bias1;
                let v_hat = v.weights[i] / bias2;
                layer.weights[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
            }
            for i in 0..layer.bias.len() {
                m.bias[i] = cfg.adam_beta1 * m.bias[i] + (1.0 - cfg.adam_beta1) * g.bias[i];
                v.bias[i] = cfg.adam_beta2 * v.bias[i] + (1.0 - cfg.adam_beta2) * g.bias[i] * g.bias[i];
                let m_hat = m.bias[i] / bias1;
                let v_hat = v.bias[i] / bias2;
                layer.bias[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
            }
        }
    }
}

/// Trains the model on the dataset, returning the trained model and the
/// per-epoch loss curve.
pub fn train(
    model: &EmbeddingModel,
    dataset: &TripletDataset,
    config: &TrainConfig,
) -> Result<(EmbeddingModel, Vec<EpochStats>), TrainError> {
    config.validate()?;
    if dataset.descriptor_dim() != model.input_dim() {
        return Err(TrainError::BadDataset {
            detail: format!(
                "descriptor dim {} does not match model input {}",
                dataset.descriptor_dim(),
                model.input_dim()
            ),
        });
    }

    let mut by_label: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (idx, item) in dataset.items().iter().enumerate() {
        by_label.entry(item.label).or_default().push(idx);
    }
    let label_list: Vec<u32> = by_label.keys().copied().collect();

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut model = model.clone();
    let mut adam = AdamState::new(&model);
    let alpha = model.margin_alpha();
    let labels_per_batch = config.batch_size.div_ceil(config.views_per_label);
    let batches_per_epoch = dataset.len().div_ceil(config.batch_size).max(1);
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut epoch_labels = label_list.clone();
        epoch_labels.shuffle(&mut rng);
        let mut cursor = 0usize;
        let mut loss_sum = 0.0;
        let mut mined_total = 0usize;
        let mut pairs_total = 0usize;

        for _ in 0..batches_per_epoch {
            // Compose the batch: a handful of labels, a few views each.
            let mut batch: Vec<(Vec<f64>, u32)> = Vec::with_capacity(config.batch_size);
            for _ in 0..labels_per_batch {
                let label = epoch_labels[cursor % epoch_labels.len()];
                cursor += 1;
                let pool = &by_label[&label];
                let picks: Vec<usize> = if pool.len() >= config.views_per_label {
                    let mut shuffled = pool.clone();
                    shuffled.shuffle(&mut rng);
                    shuffled.truncate(config.views_per_label);
                    shuffled
                } else {
                    (0..config.views_per_label)
                        .map(|_| pool[rng.random_range(0..pool.len())])
                        .collect()
                };
                for idx in picks {
                    let descriptor =
                        augment(&dataset.items()[idx].descriptor, &config.augmentation, &mut rng)?;
                    batch.push((descriptor, label));
                }
            }

            let traces: Vec<_> = batch
                .iter()
                .map(|(d, _)| model.forward_trace(d))
                .collect::<Result<_, _>>()?;
            let embeddings: Vec<Vec<f64>> = traces.iter().map(|t| t.output.clone()).collect();
            let labels: Vec<u32> = batch.iter().map(|(_, l)| *l).collect();

            let triplets = mine_semi_hard(&embeddings, &labels, alpha);
            pairs_total += anchor_positive_pairs(&labels);
            mined_total += triplets.len();
            if triplets.is_empty() {
                continue;
            }

            let mut grads = model.zero_grads();
            let mut batch_loss = 0.0;
            for &(a, p, n) in &triplets {
                batch_loss +=
                    accumulate_triplet_grad(&model, &traces[a], &traces[p], &traces[n], alpha, &mut grads)?;
            }
            let scale = 1.0 / triplets.len() as f64;
            grads.scale(scale);
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            adam.apply(&mut model, &grads, config);
            loss_sum += batch_loss;
        }

        let mean_loss = loss_sum / batches_per_epoch as f64;
        if !mean_loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        curve.push(EpochStats {
            epoch,
            mean_loss,
            active_triplet_fraction: if pairs_total == 0 {
                0.0
            } else {
                mined_total as f64 / pairs_total as f64
            },
        });
    }

    Ok((model, curve))
}

fn anchor_positive_pairs(labels: &[u32]) -> usize {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts.values().map(|&n| n * (n - 1)).sum()
}

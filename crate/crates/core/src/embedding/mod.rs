//! Metric embedding trained with triplet loss and online semi-hard mining:
//! identical objects land close together, distinct ones at least a margin
//! apart.

mod augment;
mod loss;
mod mlp;
mod train;

pub use augment::{augment, flip_horizontal, rotate_bilinear, AugmentConfig, AugmentError, AugmentMode};
pub use loss::{mine_semi_hard, squared_distance, triplet_loss, triplet_loss_grad};
pub use mlp::{Activation, EmbeddingModel, Gradients, Layer, ModelError};
pub use train::{train, DatasetItem, EpochStats, TrainConfig, TrainError, TripletDataset};

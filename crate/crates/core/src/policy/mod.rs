//! The learnable recommendation policy, its training against search targets,
//! and the greedy, supervised and history-free baselines.

mod baselines;
mod checkpoint;
mod loss;
mod model;
mod net;
mod tensor;
mod train;
mod vocab;

pub mod gradcheck;


pub use baselines::{
    greedy_labels, greedy_recommend, nst_recommend, supervised_targets, train_greedy_classifier,
    train_no_state_transition, train_supervised, SupervisedSearch, SupervisedTarget,
};
pub use checkpoint::{Checkpoint, CheckpointModel, Method, CHECKPOINT_VERSION};
pub use loss::{kl_loss, KlDirection, DEFAULT_EPSILON};
pub use model::{policy_forward, ClassifierModel, PolicyModel};
pub use net::{Arch, ClassifierParams, Encoder, ParamSet, PolicyParams};
pub use tensor::Matrix;
pub use train::{
    kl_training_step, policy_examples, train_policy, train_policy_with, EpochLog, Example, TrainLog, Trainable, Trainer,
};
pub use vocab::Vocab;

use crate::inventory::{LabelId, TokenizerScheme};
use crate::reward::{RewardError, Trajectory};
use crate::search::SearchError;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("every label is masked; no action is available")]
    NoAction,
    #[error("label {0} is outside the model's vocabulary")]
    UnknownLabel(LabelId),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("the training split has no usable queries")]
    EmptyTrainingSet,
    #[error("non-finite loss {loss} at step {step}: {detail}")]
    NonFinite { step: usize, loss: f64, detail: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint was trained on inventory {expected} but the corpus inventory is {found}")]
    InventoryMismatch { expected: String, found: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    /// Optimizer passes over the examples collected in one epoch.
    pub passes: usize,
    /// Self-play queries per epoch; all training queries when absent.
    pub episodes_per_epoch: Option<usize>,
    /// Restrict the training softmax to the query's candidate labels. Off by
    /// default: decoding has no candidate mask, and labels that never appear in
    /// a training softmax keep untrained logits.
    pub mask_to_candidates: bool,
    pub kl_direction: KlDirection,
    pub kl_epsilon: f64,
    pub dim: usize,
    pub heads: usize,
    pub tokenizer: TokenizerScheme,
    pub seed: u64,
    pub supervised: SupervisedSearch,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 32,
            clip_norm: 5.0,
            passes: 10,
            episodes_per_epoch: None,
            mask_to_candidates: false,
            kl_direction: KlDirection::default(),
            kl_epsilon: DEFAULT_EPSILON,
            dim: 64,
            heads: 2,
            tokenizer: TokenizerScheme::default(),
            seed: 0,
            supervised: SupervisedSearch::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: &str| Err(PolicyError::Config(m.to_string()));
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size < 1 || self.passes < 1 {
            return bad("batch size and passes must be at least 1");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip norm must be positive");
        }
        if !(self.kl_epsilon >= 0.0) {
            return bad("epsilon must be non-negative");
        }
        if self.dim == 0 || self.heads == 0 || self.dim % self.heads != 0 {
            return bad("dim must be a positive multiple of heads");
        }
        Ok(())
    }
}

/// Anything that turns a free-text question into an ordered label list.
pub trait Recommender: Send + Sync {
    /// Row name in reports.
    fn name(&self) -> &str;
    fn recommend(&self, text: &str, n: usize) -> Trajectory;
}

impl Recommender for Checkpoint {
    fn name(&self) -> &str {
        &self.name
    }

    fn recommend(&self, text: &str, n: usize) -> Trajectory {
        Checkpoint::recommend(self, text, n)
    }
}

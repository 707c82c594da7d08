//! The experiment configuration file: one serde document for every stage.

use crate::eval::SimConfig;
use crate::inventory::{GeneratorConfig, TokenizerScheme};
use crate::policy::{KlDirection, TrainConfig};
use crate::reward::RewardConfig;
use crate::search::SearchConfig;
use crate::service::ServiceConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Recall cut-offs.
    pub ns: Vec<usize>,
    /// Label count for complementarity metrics.
    pub n: usize,
    pub tokenizer: TokenizerScheme,
    /// Seed of the uniform reference row.
    pub uniform_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ns: vec![3, 6],
            n: 6,
            tokenizer: TokenizerScheme::Whitespace,
            uniform_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    pub search: SearchConfig,
    pub train: TrainConfig,
    /// Reward of the main policy; also the supervised baseline's target reward.
    pub reward: RewardConfig,
    pub eval: EvalConfig,
    pub sim: SimConfig,
    pub service: ServiceConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            generator: GeneratorConfig::default(),
            search: SearchConfig::default(),
            // The smoothed model-to-target KL fits visit-count targets far more
            // slowly than cross-entropy at the same budget.
            train: TrainConfig {
                kl_direction: KlDirection::TargetToModel,
                ..TrainConfig::default()
            },
            reward: RewardConfig::default(),
            eval: EvalConfig::default(),
            sim: SimConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

use super::loss::{kl_loss, KlDirection};
use super::model::PolicyModel;
use super::net::{Arch, ClassifierParams, ParamSet, PolicyParams};
use super::tensor::round_f32;
use super::vocab::Vocab;
use super::{PolicyError, TrainConfig};
use crate::inventory::{AnnotatedQuery, Corpus, Inventory, Split};
use crate::reward::{CoverTable, RewardConfig};
use crate::rng;
use crate::search::{self_play_batch, SearchConfig, SearchError, TrainingPair};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One supervised example: encoded query, label history, allowed outputs and a dense target.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub tokens: Vec<usize>,
    pub history: Vec<usize>,
    pub allowed: Vec<bool>,
    pub target: Vec<f64>,
}

pub trait Trainable: ParamSet + Send + Sync {
    /// Adds the example's gradient to `grads` and returns its loss.
    fn example_grad(&self, arch: &Arch, ex: &Example, dir: KlDirection, eps: f64, grads: &mut Self) -> f64;

    fn example_loss(&self, arch: &Arch, ex: &Example, dir: KlDirection, eps: f64) -> f64;
}

impl Trainable for PolicyParams {
    fn example_grad(&self, arch: &Arch, ex: &Example, dir: KlDirection, eps: f64, grads: &mut Self) -> f64 {
        let cache = self.forward(arch, &ex.tokens, &ex.history);
        let (loss, dlogits) = kl_loss(&cache.logits, &ex.allowed, &ex.target, dir, eps);
        self.backward(arch, &cache, &ex.history, &dlogits, grads);
        loss
    }

    fn example_loss(&self, arch: &Arch, ex: &Example, dir: KlDirection, eps: f64) -> f64 {
        let cache = self.forward(arch, &ex.tokens, &ex.history);
        kl_loss(&cache.logits, &ex.allowed, &ex.target, dir, eps).0
    }
}

impl Trainable for ClassifierParams {
    fn example_grad(&self, _arch: &Arch, ex: &Example, dir: KlDirection, eps: f64, grads: &mut Self) -> f64 {
        let cache = self.forward(&ex.tokens);
        let (loss, dlogits) = kl_loss(&cache.logits, &ex.allowed, &ex.target, dir, eps);
        self.backward(&cache, &dlogits, grads);
        loss
    }

    fn example_loss(&self, _arch: &Arch, ex: &Example, dir: KlDirection, eps: f64) -> f64 {
        kl_loss(&self.forward(&ex.tokens).logits, &ex.allowed, &ex.target, dir, eps).0
    }
}

/// SGD with momentum and global-norm clipping. Parameters are rounded to f32
/// after every update so checkpoints round-trip exactly.
#[derive(Debug, Clone)]
pub struct Trainer<P: Trainable> {
    pub params: P,
    pub arch: Arch,
    velocity: P,
    pub learning_rate: f64,
    pub momentum: f64,
    pub clip_norm: f64,
    pub direction: KlDirection,
    pub epsilon: f64,
    pub steps: usize,
}

const CHUNK: usize = 8;

impl<P: Trainable> Trainer<P> {
    pub fn new(params: P, arch: Arch, cfg: &TrainConfig) -> Self {
        Trainer {
            velocity: params.zeros_like(),
            params,
            arch,
            learning_rate: cfg.learning_rate,
            momentum: cfg.momentum,
            clip_norm: cfg.clip_norm,
            direction: cfg.kl_direction,
            epsilon: cfg.kl_epsilon,
            steps: 0,
        }
    }

    /// Mean loss and gradient over a batch. Chunks are reduced in a fixed
    /// order so the result does not depend on the thread count.
    pub fn batch_gradient(&self, batch: &[&Example]) -> (f64, P) {
        let parts: Vec<(f64, P)> = batch
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut g = self.params.zeros_like();
                let mut loss = 0.0;
                for ex in chunk {
                    loss += self.params.example_grad(&self.arch, ex, self.direction, self.epsilon, &mut g);
                }
                (loss, g)
            })
            .collect();
        let mut iter = parts.into_iter();
        let (mut loss, mut grads) = iter.next().expect("non-empty batch");
        for (l, g) in iter {
            loss += l;
            grads.add_assign(&g);
        }
        let inv = 1.0 / batch.len() as f64;
        grads.blocks_mut().into_iter().for_each(|m| m.scale(inv));
        (loss * inv, grads)
    }

    /// One update on `batch`; returns the pre-update mean loss.
    pub fn step(&mut self, batch: &[&Example]) -> Result<f64, PolicyError> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let (loss, mut grads) = self.batch_gradient(batch);
        if !loss.is_finite() || !grads.is_finite() {
            return Err(PolicyError::NonFinite {
                step: self.steps,
                loss,
                detail: format!(
                    "batch of {}; parameters finite: {}; gradient finite: {}",
                    batch.len(),
                    self.params.is_finite(),
                    grads.is_finite()
                ),
            });
        }
        let norm = grads.blocks().iter().map(|(_, m)| m.sum_sq()).sum::<f64>().sqrt();
        if norm > self.clip_norm {
            let s = self.clip_norm / norm;
            grads.blocks_mut().into_iter().for_each(|m| m.scale(s));
        }
        for ((p, v), (_, g)) in self
            .params
            .blocks_mut()
            .into_iter()
            .zip(self.velocity.blocks_mut())
            .zip(grads.blocks())
        {
            for ((pi, vi), gi) in p.data.iter_mut().zip(v.data.iter_mut()).zip(&g.data) {
                *vi = self.momentum * *vi + gi;
                *pi = round_f32(*pi - self.learning_rate * *vi);
            }
        }
        self.steps += 1;
        Ok(loss)
    }

    pub fn mean_loss(&self, examples: &[Example]) -> f64 {
        if examples.is_empty() {
            return 0.0;
        }
        let total: f64 = examples
            .par_iter()
            .map(|ex| self.params.example_loss(&self.arch, ex, self.direction, self.epsilon))
            .collect::<Vec<_>>()
            .iter()
            .sum();
        total / examples.len() as f64
    }

    /// Shuffled minibatch passes; returns the mean pre-update loss of the last pass.
    pub fn run_passes<R: Rng>(
        &mut self,
        examples: &[Example],
        passes: usize,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<f64, PolicyError> {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut last = 0.0;
        for _ in 0..passes {
            order.shuffle(rng);
            let (mut sum, mut batches) = (0.0, 0usize);
            for chunk in order.chunks(batch_size) {
                let batch: Vec<&Example> = chunk.iter().map(|&i| &examples[i]).collect();
                sum += self.step(&batch)?;
                batches += 1;
            }
            last = if batches > 0 { sum / batches as f64 } else { 0.0 };
        }
        Ok(last)
    }
}

/// One optimizer update of the policy on a batch of (state, target) examples.
pub fn kl_training_step<P: Trainable>(trainer: &mut Trainer<P>, batch: &[Example]) -> Result<f64, PolicyError> {
    let refs: Vec<&Example> = batch.iter().collect();
    trainer.step(&refs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub examples: usize,
    /// Queries skipped because no label touches their intents.
    pub skipped: usize,
    /// Mean terminal reward of this epoch's self-play episodes.
    pub selfplay_reward: Option<f64>,
    /// Mean reward of the policy's own greedy decoding on the episode queries, after the epoch.
    pub policy_reward: Option<f64>,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

/// Converts recorded search targets into training examples.
pub fn policy_examples(
    inv: &Inventory,
    vocab: &Vocab,
    aq: &AnnotatedQuery,
    pairs: &[TrainingPair],
    mask_to_candidates: bool,
) -> Vec<Example> {
    let l = inv.num_labels();
    let candidates = CoverTable::new(inv, aq);
    let tokens = vocab.encode(&aq.text);
    pairs
        .iter()
        .map(|pair| {
            let mut allowed = if mask_to_candidates {
                let mut a = vec![false; l];
                candidates.candidates().iter().for_each(|x| a[x.index()] = true);
                a
            } else {
                vec![true; l]
            };
            let history: Vec<usize> = pair.prefix.iter().map(|x| x.index()).collect();
            history.iter().for_each(|&h| allowed[h] = false);
            let mut target = vec![0.0; l];
            for (x, p) in &pair.pi {
                target[x.index()] = *p;
            }
            Example {
                tokens: tokens.clone(),
                history,
                allowed,
                target,
            }
        })
        .collect()
}

/// Mean reward of the model's greedy decoding over `queries`.
pub fn policy_reward(model: &PolicyModel, inv: &Inventory, queries: &[&AnnotatedQuery], n: usize, cfg: &RewardConfig) -> f64 {
    if queries.is_empty() {
        return 0.0;
    }
    let total: f64 = queries
        .par_iter()
        .map(|aq| CoverTable::new(inv, aq).reward_of_labels(model.decode(&aq.text, n).labels(), cfg))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    total / queries.len() as f64
}

pub fn train_policy(
    corpus: &Corpus,
    search: &SearchConfig,
    cfg: &TrainConfig,
    reward: &RewardConfig,
) -> Result<(PolicyModel, TrainLog), PolicyError> {
    train_policy_with(corpus, search, cfg, reward, &mut |_, _| Ok(()))
}

/// Self-play then KL updates, once per epoch. `on_epoch` sees the model after each epoch.
pub fn train_policy_with(
    corpus: &Corpus,
    search: &SearchConfig,
    cfg: &TrainConfig,
    reward: &RewardConfig,
    on_epoch: &mut dyn FnMut(usize, &PolicyModel) -> Result<(), PolicyError>,
) -> Result<(PolicyModel, TrainLog), PolicyError> {
    cfg.validate()?;
    search.validate()?;
    let inv = &corpus.inventory;
    let usable: Vec<&AnnotatedQuery> = corpus
        .split(Split::Train)
        .filter(|aq| !CoverTable::new(inv, aq).is_empty())
        .collect();
    let skipped = corpus.split(Split::Train).count() - usable.len();
    if skipped > 0 {
        log::warn!("{skipped} training queries have no candidate labels and are skipped");
    }
    if usable.is_empty() {
        return Err(PolicyError::EmptyTrainingSet);
    }
    let vocab = Vocab::build(corpus.split(Split::Train).map(|q| q.text.as_str()), cfg.tokenizer);
    let mut model = PolicyModel::new(vocab, cfg.dim, cfg.heads, inv.num_labels(), cfg.seed)?;
    let mut trainer = Trainer::new(model.params.clone(), model.arch.clone(), cfg);
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let mut queries = usable.clone();
        if let Some(k) = cfg.episodes_per_epoch {
            if k < queries.len() {
                queries.shuffle(&mut rng::stream(cfg.seed, &[0xe915, epoch as u64]));
                queries.truncate(k);
            }
        }
        let episodes = self_play_batch(inv, &queries, search, reward, search.seed, epoch as u64);
        let mut examples = Vec::new();
        let mut rewards = Vec::new();
        for (aq, ep) in queries.iter().zip(episodes) {
            match ep {
                Ok(ep) => {
                    rewards.push(ep.reward);
                    examples.extend(policy_examples(inv, &model.vocab, aq, &ep.pairs, cfg.mask_to_candidates));
                }
                Err(SearchError::NoCandidates { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
        let mut rng = rng::stream(cfg.seed, &[0x7a1, epoch as u64]);
        let train_loss = trainer.run_passes(&examples, cfg.passes, cfg.batch_size, &mut rng)?;
        model.params = trainer.params.clone();
        let entry = EpochLog {
            epoch: epoch + 1,
            examples: examples.len(),
            skipped,
            selfplay_reward: mean(&rewards),
            policy_reward: Some(policy_reward(&model, inv, &queries, search.max_len, reward)),
            train_loss,
            validation_loss: None,
        };
        log::info!(
            "epoch {}: {} examples, self-play reward {:.4}, policy reward {:.4}, loss {:.5}",
            entry.epoch,
            entry.examples,
            entry.selfplay_reward.unwrap_or(f64::NAN),
            entry.policy_reward.unwrap_or(f64::NAN),
            entry.train_loss
        );
        log.epochs.push(entry);
        on_epoch(epoch + 1, &model)?;
    }
    Ok((model, log))
}

pub(crate) fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

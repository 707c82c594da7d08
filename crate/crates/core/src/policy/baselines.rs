use super::model::{clip_n, top_n, ClassifierModel, PolicyModel};
use super::train::{mean, EpochLog, Example, TrainLog, Trainer};
use super::vocab::Vocab;
use super::{PolicyError, TrainConfig};
use crate::inventory::{AnnotatedQuery, Corpus, Inventory, LabelId, Split};
use crate::reward::{CoverState, CoverTable, RewardConfig, Trajectory};
use crate::rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Greedy max-mass selection: at each step the label whose not-yet-covered
/// intents carry the most probability under `f`; ties to the lowest label id.
pub fn greedy_labels(inv: &Inventory, f: &[f64], n: usize) -> Trajectory {
    let n = clip_n(n, inv.num_labels());
    let mut covered = vec![false; inv.num_intents()];
    let mut picked: Vec<LabelId> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<(LabelId, f64)> = None;
        for label in inv.labels() {
            if picked.contains(&label.id) {
                continue;
            }
            let score: f64 = label
                .intents
                .iter()
                .filter(|s| !covered[s.index()])
                .map(|s| f[s.index()])
                .sum();
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((label.id, score));
            }
        }
        let (x, _) = best.expect("n is clipped to the label count");
        inv.label_intents(x).iter().for_each(|s| covered[s.index()] = true);
        picked.push(x);
    }
    Trajectory::new(picked).expect("distinct picks")
}

pub fn greedy_recommend(model: &ClassifierModel, inv: &Inventory, text: &str, n: usize) -> Trajectory {
    greedy_labels(inv, &model.predict(text), n)
}

/// History-free decoding: the n most probable labels.
pub fn nst_recommend(model: &ClassifierModel, text: &str, n: usize) -> Trajectory {
    let n = clip_n(n, model.arch.outputs);
    let picks = top_n(&model.predict(text), n);
    Trajectory::new(picks.into_iter().map(|i| LabelId(i as u32)).collect()).expect("distinct picks")
}

fn dense_p(inv: &Inventory, aq: &AnnotatedQuery) -> Vec<f64> {
    let mut p = vec![0.0; inv.num_intents()];
    let w = 1.0 / aq.potential_intents().len() as f64;
    aq.potential_intents().iter().for_each(|s| p[s.index()] = w);
    p
}

/// Σ_{s ∈ ℳ(x) ∩ 𝒬(q)} P(s|q) per label, normalized over labels. None without candidates.
fn relevance_target(inv: &Inventory, aq: &AnnotatedQuery) -> Option<Vec<f64>> {
    let p = dense_p(inv, aq);
    let mass: Vec<f64> = inv
        .labels()
        .iter()
        .map(|l| l.intents.iter().map(|s| p[s.index()]).sum())
        .collect();
    let total: f64 = mass.iter().sum();
    (total > 0.0).then(|| mass.into_iter().map(|m| m / total).collect())
}

fn classifier_examples(vocab: &Vocab, items: Vec<(&AnnotatedQuery, Vec<f64>)>) -> Vec<Example> {
    items
        .into_iter()
        .map(|(aq, target)| Example {
            tokens: vocab.encode(&aq.text),
            history: Vec::new(),
            allowed: vec![true; target.len()],
            target,
        })
        .collect()
}

fn train_classifier(
    corpus: &Corpus,
    cfg: &TrainConfig,
    outputs: usize,
    target: impl Fn(&AnnotatedQuery) -> Option<Vec<f64>>,
) -> Result<(ClassifierModel, TrainLog), PolicyError> {
    cfg.validate()?;
    let vocab = Vocab::build(corpus.split(Split::Train).map(|q| q.text.as_str()), cfg.tokenizer);
    let train: Vec<_> = corpus.split(Split::Train).filter_map(|aq| target(aq).map(|t| (aq, t))).collect();
    let skipped = corpus.split(Split::Train).count() - train.len();
    if train.is_empty() {
        return Err(PolicyError::EmptyTrainingSet);
    }
    let valid: Vec<_> = corpus.split(Split::Test).filter_map(|aq| target(aq).map(|t| (aq, t))).collect();
    let train = classifier_examples(&vocab, train);
    let valid = classifier_examples(&vocab, valid);
    let mut model = ClassifierModel::new(vocab, cfg.dim, outputs, cfg.seed)?;
    let mut trainer = Trainer::new(model.params.clone(), model.arch.clone(), cfg);
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let mut rng = rng::stream(cfg.seed, &[0xc7a, epoch as u64]);
        let train_loss = trainer.run_passes(&train, cfg.passes, cfg.batch_size, &mut rng)?;
        let validation_loss = (!valid.is_empty()).then(|| trainer.mean_loss(&valid));
        log::info!(
            "epoch {}: loss {train_loss:.5}, validation {:.5}",
            epoch + 1,
            validation_loss.unwrap_or(f64::NAN)
        );
        log.epochs.push(EpochLog {
            epoch: epoch + 1,
            examples: train.len(),
            skipped,
            selfplay_reward: None,
            policy_reward: None,
            train_loss,
            validation_loss,
        });
    }
    model.params = trainer.params;
    Ok((model, log))
}

/// Intent classifier f_θ fitted to P(·|q) with the configured KL.
pub fn train_greedy_classifier(corpus: &Corpus, cfg: &TrainConfig) -> Result<(ClassifierModel, TrainLog), PolicyError> {
    let inv = &corpus.inventory;
    train_classifier(corpus, cfg, inv.num_intents(), |aq| Some(dense_p(inv, aq)))
}

/// Label classifier fitted to the normalized label relevance mass.
pub fn train_no_state_transition(corpus: &Corpus, cfg: &TrainConfig) -> Result<(ClassifierModel, TrainLog), PolicyError> {
    let inv = &corpus.inventory;
    train_classifier(corpus, cfg, inv.num_labels(), |aq| relevance_target(inv, aq))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SupervisedSearch {
    /// Enumerate every ordered sequence up to this many candidates.
    pub exhaustive_max: usize,
    /// Beam width above that.
    pub beam_width: usize,
}

impl Default for SupervisedSearch {
    fn default() -> Self {
        SupervisedSearch {
            exhaustive_max: 12,
            beam_width: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedTarget {
    pub trajectory: Trajectory,
    pub reward: f64,
    pub exhaustive: bool,
}

const TIE: f64 = 1e-12;

/// Reservoir choice among maximal-reward sequences.
struct BestSet {
    best: Vec<usize>,
    reward: f64,
    ties: u64,
}

impl BestSet {
    fn new() -> Self {
        BestSet {
            best: Vec::new(),
            reward: f64::NEG_INFINITY,
            ties: 0,
        }
    }

    fn offer<R: Rng>(&mut self, seq: &[usize], r: f64, rng: &mut R) {
        if r > self.reward + TIE {
            self.reward = r;
            self.best.clear();
            self.best.extend_from_slice(seq);
            self.ties = 1;
        } else if (r - self.reward).abs() <= TIE {
            self.ties += 1;
            if rng.random_range(0..self.ties) == 0 {
                self.best.clear();
                self.best.extend_from_slice(seq);
            }
        }
    }
}

fn enumerate<R: Rng>(
    table: &CoverTable,
    depth: usize,
    cfg: &RewardConfig,
    seq: &mut Vec<usize>,
    used: &mut [bool],
    states: &mut Vec<CoverState>,
    out: &mut BestSet,
    rng: &mut R,
) {
    let level = seq.len();
    if level == depth {
        out.offer(seq, table.total(&states[level], cfg), rng);
        return;
    }
    for c in 0..table.len() {
        if used[c] {
            continue;
        }
        let (lo, hi) = states.split_at_mut(level + 1);
        hi[0].clone_from(&lo[level]);
        table.apply(&mut hi[0], c);
        used[c] = true;
        seq.push(c);
        enumerate(table, depth, cfg, seq, used, states, out, rng);
        seq.pop();
        used[c] = false;
    }
}

fn beam<R: Rng>(table: &CoverTable, depth: usize, width: usize, cfg: &RewardConfig, rng: &mut R) -> BestSet {
    let mut frontier: Vec<(Vec<usize>, CoverState)> = vec![(Vec::new(), table.empty_state())];
    for _ in 0..depth {
        let mut next: Vec<(f64, Vec<usize>, CoverState)> = Vec::new();
        for (seq, st) in &frontier {
            for c in 0..table.len() {
                if seq.contains(&c) {
                    continue;
                }
                let mut s = st.clone();
                table.apply(&mut s, c);
                let mut q = seq.clone();
                q.push(c);
                next.push((table.total(&s, cfg), q, s));
            }
        }
        next.sort_by(|a, b| b.0.total_cmp(&a.0));
        next.truncate(width.max(1));
        frontier = next.into_iter().map(|(_, q, s)| (q, s)).collect();
    }
    let mut out = BestSet::new();
    for (seq, st) in &frontier {
        out.offer(seq, table.total(st, cfg), rng);
    }
    out
}

/// Ground-truth sequence for the supervised baseline: exhaustive over small
/// candidate sets, beam search otherwise; random tie-break among maxima.
pub fn supervised_targets<R: Rng>(
    inv: &Inventory,
    aq: &AnnotatedQuery,
    n: usize,
    reward: &RewardConfig,
    search: &SupervisedSearch,
    rng: &mut R,
) -> Option<SupervisedTarget> {
    let table = CoverTable::new(inv, aq);
    if table.is_empty() || n == 0 {
        return None;
    }
    let depth = n.min(table.len());
    let exhaustive = table.len() <= search.exhaustive_max;
    let best = if exhaustive {
        let mut out = BestSet::new();
        let mut states = vec![table.empty_state(); depth + 1];
        let mut used = vec![false; table.len()];
        enumerate(&table, depth, reward, &mut Vec::new(), &mut used, &mut states, &mut out, rng);
        out
    } else {
        beam(&table, depth, search.beam_width, reward, rng)
    };
    let labels = best.best.iter().map(|&c| table.candidates()[c]).collect();
    Some(SupervisedTarget {
        trajectory: Trajectory::new(labels).expect("distinct candidates"),
        reward: best.reward,
        exhaustive,
    })
}

/// Teacher-forced cross-entropy on supervised target sequences, same architecture as the policy.
pub fn train_supervised(
    corpus: &Corpus,
    n: usize,
    cfg: &TrainConfig,
    reward: &RewardConfig,
) -> Result<(PolicyModel, TrainLog), PolicyError> {
    cfg.validate()?;
    let inv = &corpus.inventory;
    let queries: Vec<&AnnotatedQuery> = corpus.split(Split::Train).collect();
    let targets: Vec<Option<SupervisedTarget>> = queries
        .par_iter()
        .enumerate()
        .map(|(i, aq)| {
            let mut rng = rng::stream(cfg.seed, &[0x5e9, i as u64]);
            supervised_targets(inv, aq, n, reward, &cfg.supervised, &mut rng)
        })
        .collect();
    let skipped = targets.iter().filter(|t| t.is_none()).count();
    let vocab = Vocab::build(queries.iter().map(|q| q.text.as_str()), cfg.tokenizer);
    let l = inv.num_labels();
    let mut examples = Vec::new();
    for (aq, target) in queries.iter().zip(&targets) {
        let Some(target) = target else { continue };
        let tokens = vocab.encode(&aq.text);
        let candidates: BTreeSet<LabelId> = CoverTable::new(inv, aq).candidates().iter().copied().collect();
        let labels = target.trajectory.labels();
        for t in 0..labels.len() {
            let history: Vec<usize> = labels[..t].iter().map(|x| x.index()).collect();
            let mut allowed: Vec<bool> = if cfg.mask_to_candidates {
                (0..l).map(|i| candidates.contains(&LabelId(i as u32))).collect()
            } else {
                vec![true; l]
            };
            history.iter().for_each(|&h| allowed[h] = false);
            let mut one_hot = vec![0.0; l];
            one_hot[labels[t].index()] = 1.0;
            examples.push(Example {
                tokens: tokens.clone(),
                history,
                allowed,
                target: one_hot,
            });
        }
    }
    if examples.is_empty() {
        return Err(PolicyError::EmptyTrainingSet);
    }
    let mut model = PolicyModel::new(vocab, cfg.dim, cfg.heads, l, cfg.seed)?;
    let ce = TrainConfig {
        kl_direction: super::KlDirection::TargetToModel,
        kl_epsilon: 0.0,
        ..cfg.clone()
    };
    let mut trainer = Trainer::new(model.params.clone(), model.arch.clone(), &ce);
    let mut log = TrainLog::default();
    let target_reward = mean(&targets.iter().flatten().map(|t| t.reward).collect::<Vec<_>>());
    for epoch in 0..cfg.epochs {
        let mut rng = rng::stream(cfg.seed, &[0x5e7, epoch as u64]);
        let train_loss = trainer.run_passes(&examples, cfg.passes, cfg.batch_size, &mut rng)?;
        log::info!("epoch {}: loss {train_loss:.5}", epoch + 1);
        log.epochs.push(EpochLog {
            epoch: epoch + 1,
            examples: examples.len(),
            skipped,
            selfplay_reward: target_reward,
            policy_reward: None,
            train_loss,
            validation_loss: None,
        });
    }
    model.params = trainer.params;
    Ok((model, log))
}

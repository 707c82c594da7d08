use super::net::{build_arch, Arch, ClassifierParams, ParamSet, PolicyParams};
use super::tensor::{masked_softmax, softmax};
use super::vocab::Vocab;
use super::PolicyError;
use crate::inventory::LabelId;
use crate::reward::Trajectory;
use crate::rng;
use std::collections::{BTreeMap, BTreeSet};

/// The label recommendation policy z_θ(· | q, τ_t).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel {
    pub arch: Arch,
    pub vocab: Vocab,
    pub params: PolicyParams,
    pub seed: u64,
}

impl PolicyModel {
    pub fn new(vocab: Vocab, dim: usize, heads: usize, num_labels: usize, seed: u64) -> Result<Self, PolicyError> {
        check_arch(dim, heads, num_labels)?;
        let arch = build_arch(&vocab, dim, heads, num_labels);
        let params = PolicyParams::new(&arch, &mut rng::stream(seed, &[0x1417]));
        Ok(PolicyModel { arch, vocab, params, seed })
    }

    pub fn num_labels(&self) -> usize {
        self.arch.outputs
    }

    pub fn num_params(&self) -> usize {
        self.params.num_params()
    }

    pub fn logits(&self, tokens: &[usize], history: &[LabelId]) -> Vec<f64> {
        let h: Vec<usize> = history.iter().map(|x| x.index()).collect();
        self.params.forward(&self.arch, tokens, &h).logits
    }

    /// Dense distribution over labels; disallowed labels get exactly 0.
    pub fn distribution(&self, tokens: &[usize], history: &[LabelId], allowed: &[bool]) -> Result<Vec<f64>, PolicyError> {
        if !allowed.iter().any(|&a| a) {
            return Err(PolicyError::NoAction);
        }
        Ok(masked_softmax(&self.logits(tokens, history), allowed))
    }

    /// Greedy argmax decoding with history masking only. Ties go to the lowest label id.
    pub fn decode(&self, text: &str, n: usize) -> Trajectory {
        let n = clip_n(n, self.num_labels());
        let tokens = self.vocab.encode(text);
        let enc = self.params.encode(&tokens);
        let mut history: Vec<usize> = Vec::with_capacity(n);
        for _ in 0..n {
            let logits = self.params.step(&self.arch, &enc, &history).logits;
            let best = argmax_excluding(&logits, &history);
            history.push(best);
        }
        Trajectory::new(history.into_iter().map(|i| LabelId(i as u32)).collect()).expect("distinct by masking")
    }
}

fn check_arch(dim: usize, heads: usize, outputs: usize) -> Result<(), PolicyError> {
    if dim == 0 || heads == 0 || dim % heads != 0 {
        return Err(PolicyError::Config(format!(
            "model width {dim} must be a positive multiple of the head count {heads}"
        )));
    }
    if outputs == 0 {
        return Err(PolicyError::Config("model needs at least one output".into()));
    }
    Ok(())
}

pub(crate) fn clip_n(n: usize, max: usize) -> usize {
    if n > max {
        log::warn!("requested {n} labels but only {max} exist; clipping");
        max
    } else {
        n
    }
}

fn argmax_excluding(scores: &[f64], excluded: &[usize]) -> usize {
    let mut best = usize::MAX;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in scores.iter().enumerate() {
        if excluded.contains(&i) {
            continue;
        }
        if best == usize::MAX || v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Top-n indices by score with ties to the lowest index.
pub(crate) fn top_n(scores: &[f64], n: usize) -> Vec<usize> {
    let mut picked = Vec::with_capacity(n);
    for _ in 0..n.min(scores.len()) {
        picked.push(argmax_excluding(scores, &picked));
    }
    picked
}

/// z_θ(· | q, τ) over the labels not in `masked` (history labels are always masked).
pub fn policy_forward<S: AsRef<str>>(
    model: &PolicyModel,
    tokens: &[S],
    history: &Trajectory,
    masked: &BTreeSet<LabelId>,
) -> Result<BTreeMap<LabelId, f64>, PolicyError> {
    let n = model.num_labels();
    for &x in history.labels().iter().chain(masked) {
        if x.index() >= n {
            return Err(PolicyError::UnknownLabel(x));
        }
    }
    let mut allowed = vec![true; n];
    for &x in history.labels().iter().chain(masked) {
        allowed[x.index()] = false;
    }
    let ids = model.vocab.encode_tokens(tokens);
    let p = model.distribution(&ids, history.labels(), &allowed)?;
    Ok(p
        .into_iter()
        .enumerate()
        .filter(|(i, _)| allowed[*i])
        .map(|(i, p)| (LabelId(i as u32), p))
        .collect())
}

/// Query encoder plus a linear head: an intent classifier for the greedy
/// baseline or a label classifier for the history-free baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub arch: Arch,
    pub vocab: Vocab,
    pub params: ClassifierParams,
    pub seed: u64,
}

impl ClassifierModel {
    pub fn new(vocab: Vocab, dim: usize, outputs: usize, seed: u64) -> Result<Self, PolicyError> {
        check_arch(dim, 1, outputs)?;
        let arch = build_arch(&vocab, dim, 1, outputs);
        let params = ClassifierParams::new(&arch, &mut rng::stream(seed, &[0xc1a5]));
        Ok(ClassifierModel { arch, vocab, params, seed })
    }

    pub fn predict(&self, text: &str) -> Vec<f64> {
        softmax(&self.params.forward(&self.vocab.encode(text)).logits)
    }
}

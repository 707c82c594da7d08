use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Which way round the KL divergence against the target is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlDirection {
    /// D_KL(model ‖ target).
    #[default]
    ModelToTarget,
    /// D_KL(target ‖ model), i.e. cross-entropy up to a constant.
    TargetToModel,
}

impl fmt::Display for KlDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KlDirection::ModelToTarget => "model-to-target",
            KlDirection::TargetToModel => "target-to-model",
        })
    }
}

impl FromStr for KlDirection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model-to-target" => Ok(KlDirection::ModelToTarget),
            "target-to-model" => Ok(KlDirection::TargetToModel),
            other => Err(format!("unknown KL direction {other:?}")),
        }
    }
}

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Log-softmax over allowed entries; masked entries get −∞.
pub fn masked_log_softmax(logits: &[f64], allowed: &[bool]) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(allowed)
        .filter(|(_, &a)| a)
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let lse = max
        + logits
            .iter()
            .zip(allowed)
            .filter(|(_, &a)| a)
            .map(|(l, _)| (l - max).exp())
            .sum::<f64>()
            .ln();
    logits
        .iter()
        .zip(allowed)
        .map(|(l, &a)| if a { l - lse } else { f64::NEG_INFINITY })
        .collect()
}

/// ε-smoothed target restricted to the allowed entries and renormalized.
pub fn smooth_target(target: &[f64], allowed: &[bool], eps: f64) -> Vec<f64> {
    let raw: Vec<f64> = target
        .iter()
        .zip(allowed)
        .map(|(t, &a)| if a { t + eps } else { 0.0 })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|t| t / total).collect()
}

/// KL loss and its gradient with respect to the logits. Masked logits get a zero gradient.
pub fn kl_loss(logits: &[f64], allowed: &[bool], target: &[f64], dir: KlDirection, eps: f64) -> (f64, Vec<f64>) {
    let logp = masked_log_softmax(logits, allowed);
    let pi = smooth_target(target, allowed, eps);
    let mut grad = vec![0.0; logits.len()];
    let loss = match dir {
        KlDirection::ModelToTarget => {
            let mut loss = 0.0;
            for j in 0..logits.len() {
                if allowed[j] {
                    let p = logp[j].exp();
                    loss += p * (logp[j] - pi[j].ln());
                }
            }
            for j in 0..logits.len() {
                if allowed[j] {
                    let p = logp[j].exp();
                    grad[j] = p * (logp[j] - pi[j].ln() - loss);
                }
            }
            loss
        }
        KlDirection::TargetToModel => {
            let mut loss = 0.0;
            for j in 0..logits.len() {
                if allowed[j] {
                    if pi[j] > 0.0 {
                        loss += pi[j] * (pi[j].ln() - logp[j]);
                    }
                    grad[j] = logp[j].exp() - pi[j];
                }
            }
            loss
        }
    };
    (loss.max(0.0), grad)
}

//! Offline recall metrics, complementarity metrics, and the simulated online experiment.

mod metrics;
mod offline;
mod online;

pub use metrics::{diversity, overlap, recall_at_n, upper_bound, upper_bound_with, RecallVariant, UpperBound, EXACT_UPPER_BOUND_MAX};
pub use offline::{
    check_checkpoints, complementarity, run_offline_eval, ComplementarityReport, ComplementarityRow, MethodRow, OfflineReport,
    QueryRow,
};
pub use online::{
    oracle_click, session_outcome, session_scripts, simulate_online, ClickModel, SessionScript, SimConfig, SimReport, SimRow,
    TOP_K_ROW,
};

use crate::inventory::{AnnotatedQuery, Corpus, Split};
use crate::policy::Recommender;
use crate::reward::Trajectory;
use crate::{rng, LabelId};
use rand::seq::index::sample;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("the {0:?} split has no queries")]
    EmptySplit(Split),
    #[error("checkpoint {name} was trained on inventory {expected} but the corpus inventory is {found}")]
    InventoryMismatch { name: String, expected: String, found: String },
    #[error("invalid evaluation config: {0}")]
    Config(String),
}

/// Queries used for evaluation: the test split.
pub fn eval_queries(corpus: &Corpus) -> Result<Vec<&AnnotatedQuery>, EvalError> {
    let q: Vec<&AnnotatedQuery> = corpus.split(Split::Test).collect();
    if q.is_empty() {
        Err(EvalError::EmptySplit(Split::Test))
    } else {
        Ok(q)
    }
}

/// The untrained reference row: n distinct labels drawn uniformly, seeded by the query text.
#[derive(Debug, Clone)]
pub struct UniformRecommender {
    pub name: String,
    pub num_labels: usize,
    pub seed: u64,
}

impl UniformRecommender {
    pub fn new(num_labels: usize, seed: u64) -> Self {
        UniformRecommender {
            name: "uniform".into(),
            num_labels,
            seed,
        }
    }
}

impl Recommender for UniformRecommender {
    fn name(&self) -> &str {
        &self.name
    }

    fn recommend(&self, text: &str, n: usize) -> Trajectory {
        let mut r = rng::stream(self.seed, &[rng::text_key(text)]);
        let picks = sample(&mut r, self.num_labels, n.min(self.num_labels));
        Trajectory::new(picks.into_iter().map(|i| LabelId(i as u32)).collect()).expect("distinct sample")
    }
}

#[cfg(test)]
mod tests;

//! Interactive clarification of ambiguous questions through label recommendation.
//!
//! An ambiguous question maps to a set of potential intents. The engine
//! recommends a short sequence of label phrases that covers and partitions
//! that set, so a single click from the user narrows the question enough for
//! plain lexical intent retrieval to answer it.
//!
//! - [`inventory`]: intents, labels, the label→intent map, corpora and the
//!   synthetic benchmark generator.
//! - [`reward`]: coverage and entropy-based trajectory rewards.
//! - [`search`]: UCT tree search over label sequences and self-play.
//! - [`policy`]: the learnable recommendation network, its training, and the
//!   greedy / supervised / history-free baselines.
//! - [`eval`]: offline recall metrics, complementarity metrics, and the
//!   simulated online experiment.
//! - [`service`]: BM25 intent retrieval and the session engine behind the
//!   HTTP API.

pub mod config;
pub mod eval;
pub mod experiment;
pub mod inventory;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod search;
pub mod service;

pub use inventory::{AnnotatedQuery, Corpus, IntentId, Inventory, LabelId, Split};
pub use reward::{GainConvention, RewardConfig, Trajectory};

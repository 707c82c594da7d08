//! Trains every compared method on one benchmark and evaluates them side by side.

use crate::config::ExperimentConfig;
use crate::eval::{complementarity, run_offline_eval, simulate_online, ComplementarityReport, EvalError, OfflineReport, SimReport, UniformRecommender};
use crate::inventory::{generate_benchmark, Corpus, InventoryError};
use crate::policy::{
    train_greedy_classifier, train_no_state_transition, train_policy, train_supervised, Checkpoint, CheckpointModel, Method,
    PolicyError, Recommender, TrainLog,
};
use crate::reward::RewardConfig;
use crate::rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MethodKind {
    Rl { reward: RewardConfig },
    Supervised { reward: RewardConfig },
    Greedy,
    Nst,
}

impl MethodKind {
    /// Report row name.
    pub fn name(&self) -> String {
        match self {
            MethodKind::Rl { reward } if reward.beta == 0.0 => "rl-recall-only".into(),
            MethodKind::Rl { reward } => format!("rl-{}", reward.convention),
            MethodKind::Supervised { .. } => "supervised".into(),
            MethodKind::Greedy => "greedy".into(),
            MethodKind::Nst => "nst".into(),
        }
    }
}

/// The compared methods: the main policy, both reward ablations, and the three baselines.
pub fn standard_methods(ours: RewardConfig) -> Vec<MethodKind> {
    let mut rewards = vec![ours];
    for r in [RewardConfig::id3(), RewardConfig::default(), RewardConfig::recall_only()] {
        if !rewards.contains(&r) {
            rewards.push(r);
        }
    }
    let mut out: Vec<MethodKind> = rewards.into_iter().map(|reward| MethodKind::Rl { reward }).collect();
    out.extend([MethodKind::Supervised { reward: ours }, MethodKind::Greedy, MethodKind::Nst]);
    out
}

/// Row name of the main policy.
pub fn ours_name(cfg: &ExperimentConfig) -> String {
    MethodKind::Rl { reward: cfg.reward }.name()
}

pub fn train_method(kind: MethodKind, corpus: &Corpus, cfg: &ExperimentConfig) -> Result<(Checkpoint, TrainLog), PolicyError> {
    let inv = corpus.inventory.clone();
    let n = cfg.search.max_len;
    let (method, reward, model, log) = match kind {
        MethodKind::Rl { reward } => {
            let (m, log) = train_policy(corpus, &cfg.search, &cfg.train, &reward)?;
            (Method::Rl, Some(reward), CheckpointModel::Policy(m), log)
        }
        MethodKind::Supervised { reward } => {
            let (m, log) = train_supervised(corpus, n, &cfg.train, &reward)?;
            (Method::Supervised, Some(reward), CheckpointModel::Policy(m), log)
        }
        MethodKind::Greedy => {
            let (m, log) = train_greedy_classifier(corpus, &cfg.train)?;
            (Method::Greedy, None, CheckpointModel::Classifier(m), log)
        }
        MethodKind::Nst => {
            let (m, log) = train_no_state_transition(corpus, &cfg.train)?;
            (Method::Nst, None, CheckpointModel::Classifier(m), log)
        }
    };
    Ok((Checkpoint::new(method, kind.name(), reward, model, inv), log))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedMethod {
    pub name: String,
    pub seconds: f64,
    pub log: TrainLog,
}

/// Everything measured on one benchmark seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub seed: u64,
    pub ours: String,
    pub trained: Vec<TrainedMethod>,
    pub offline: OfflineReport,
    pub complementarity: ComplementarityReport,
    pub online: SimReport,
}

/// Per-run copy of the config with training and search seeds tied to the benchmark seed.
pub fn seeded_config(cfg: &ExperimentConfig, seed: u64) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.train.seed = rng::derive(cfg.train.seed, &[seed]);
    c.search.seed = rng::derive(cfg.search.seed, &[seed]);
    c
}

/// Generates the benchmark for `seed`, trains every method, and evaluates them.
pub fn run_benchmark(
    cfg: &ExperimentConfig,
    seed: u64,
    methods: &[MethodKind],
    on_trained: &mut dyn FnMut(&Checkpoint, f64),
) -> Result<(BenchmarkRun, Vec<Checkpoint>), ExperimentError> {
    let corpus = generate_benchmark(&cfg.generator, seed)?;
    let run_cfg = seeded_config(cfg, seed);
    let mut checkpoints = Vec::with_capacity(methods.len());
    let mut trained = Vec::with_capacity(methods.len());
    for &kind in methods {
        let start = Instant::now();
        let (ck, log) = train_method(kind, &corpus, &run_cfg)?;
        let seconds = start.elapsed().as_secs_f64();
        log::info!("seed {seed}: trained {} in {seconds:.1}s", ck.name);
        on_trained(&ck, seconds);
        trained.push(TrainedMethod {
            name: ck.name.clone(),
            seconds,
            log,
        });
        checkpoints.push(ck);
    }
    let uniform = UniformRecommender::new(corpus.inventory.num_labels(), cfg.eval.uniform_seed);
    let mut rows: Vec<&dyn Recommender> = checkpoints.iter().map(|c| c as &dyn Recommender).collect();
    rows.push(&uniform);
    let offline = run_offline_eval(&rows, &corpus, &cfg.eval.ns)?;
    let comp = complementarity(&rows, &corpus, cfg.eval.n, cfg.eval.tokenizer)?;
    let online = simulate_online(&rows[..rows.len() - 1], &corpus, &cfg.sim)?;
    Ok((
        BenchmarkRun {
            seed,
            ours: ours_name(cfg),
            trained,
            offline,
            complementarity: comp,
            online,
        },
        checkpoints,
    ))
}

/// Means across runs of a per-run quantity.
pub fn mean_over(runs: &[BenchmarkRun], f: impl Fn(&BenchmarkRun) -> Option<f64>) -> Option<f64> {
    let v: Vec<f64> = runs.iter().map(f).collect::<Option<Vec<_>>>()?;
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Mean recall at cut-off `n` of method `name` across runs.
pub fn mean_recall(runs: &[BenchmarkRun], name: &str, n: usize) -> Option<f64> {
    mean_over(runs, |r| {
        let k = r.offline.ns.iter().position(|&x| x == n)?;
        Some(r.offline.method(name)?.recall[k])
    })
}

pub fn mean_upper_bound(runs: &[BenchmarkRun], n: usize) -> Option<f64> {
    mean_over(runs, |r| {
        let k = r.offline.ns.iter().position(|&x| x == n)?;
        Some(r.offline.upper_bound[k])
    })
}

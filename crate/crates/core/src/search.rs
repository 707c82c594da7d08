//! UCT tree search over label sequences and self-play episode generation.
//!
//! Nodes store the visit count N and the summed reward W of every simulation
//! that passed through them; the exploitation term is the mean W/N. Each
//! simulation descends from the root (the current prefix) until the trajectory
//! reaches its target length, expanding unvisited children in a seeded random
//! order, then scores the completed trajectory and backs the reward up the path.

use crate::inventory::{AnnotatedQuery, Inventory, LabelId};
use crate::reward::{trajectory_reward, CoverState, CoverTable, RewardConfig, RewardError, Trajectory};
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("no candidate label intersects the potential intents of {query:?}")]
    NoCandidates { query: String },
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("prefix length {prefix} is not below the trajectory length {max}")]
    PrefixTooLong { prefix: usize, max: usize },
    #[error(transparent)]
    Reward(#[from] RewardError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Simulations per move (M).
    pub simulations: usize,
    /// Trajectory length (N).
    pub max_len: usize,
    /// Exploration weight β_T.
    pub exploration: f64,
    /// Visit-count temperature T.
    pub temperature: f64,
    pub dirichlet_alpha: f64,
    pub noise_weight: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            simulations: 1000,
            max_len: 6,
            exploration: 1.0,
            temperature: 1.0,
            dirichlet_alpha: 0.03,
            noise_weight: 0.25,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::InvalidConfig(m.to_string()));
        if self.simulations < 1 {
            return bad("simulations must be at least 1");
        }
        if self.max_len < 1 {
            return bad("trajectory length must be at least 1");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if !(0.0..=1.0).contains(&self.noise_weight) {
            return bad("noise weight must lie in [0, 1]");
        }
        if !(self.dirichlet_alpha > 0.0) {
            return bad("dirichlet alpha must be positive");
        }
        if !(self.exploration >= 0.0) {
            return bad("exploration weight must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    /// Absent at the root.
    pub label: Option<LabelId>,
    pub visits: u32,
    pub total_reward: f64,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
    pub depth: usize,
    pub min_reward: f64,
    pub max_reward: f64,
    candidate: usize,
    untried: Vec<usize>,
}

impl SearchNode {
    fn new(label: Option<LabelId>, candidate: usize, parent: Option<usize>, depth: usize, untried: Vec<usize>) -> Self {
        SearchNode {
            label,
            visits: 0,
            total_reward: 0.0,
            children: Vec::new(),
            parent,
            depth,
            min_reward: f64::INFINITY,
            max_reward: f64::NEG_INFINITY,
            candidate,
            untried,
        }
    }

    pub fn mean_reward(&self) -> Option<f64> {
        (self.visits > 0).then(|| self.total_reward / self.visits as f64)
    }
}

/// W/N + β_T·√(2 ln N(parent) / N); +∞ for unvisited nodes.
pub fn ucb_value(node: &SearchNode, parent_visits: u32, beta_t: f64) -> f64 {
    if node.visits == 0 {
        return f64::INFINITY;
    }
    let n = node.visits as f64;
    let explore = if parent_visits == 0 {
        0.0
    } else {
        (2.0 * (parent_visits as f64).ln() / n).sqrt()
    };
    node.total_reward / n + beta_t * explore
}

#[derive(Debug, Clone)]
pub struct SearchTree {
    pub nodes: Vec<SearchNode>,
}

impl SearchTree {
    pub fn root(&self) -> &SearchNode {
        &self.nodes[0]
    }

    pub fn children(&self, idx: usize) -> impl Iterator<Item = &SearchNode> {
        self.nodes[idx].children.iter().map(move |&c| &self.nodes[c])
    }
}

/// π(·|root) with the visit counts it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPolicy {
    pub pi: BTreeMap<LabelId, f64>,
    pub visits: BTreeMap<LabelId, u32>,
}

impl SearchPolicy {
    pub fn from_visits(visits: BTreeMap<LabelId, u32>, temperature: f64) -> Self {
        let weights: Vec<f64> = visits.values().map(|&n| (n as f64).powf(1.0 / temperature)).collect();
        let total: f64 = weights.iter().sum();
        let pi = visits
            .keys()
            .zip(&weights)
            .map(|(&x, &w)| (x, if total > 0.0 { w / total } else { 1.0 / weights.len() as f64 }))
            .collect();
        SearchPolicy { pi, visits }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub policy: SearchPolicy,
    pub tree: SearchTree,
    /// Best complete trajectory seen (prefix included) and its reward.
    pub best: Trajectory,
    pub best_reward: f64,
}

pub fn run_search(
    inv: &Inventory,
    aq: &AnnotatedQuery,
    prefix: &Trajectory,
    cfg: &SearchConfig,
    reward_cfg: &RewardConfig,
) -> Result<SearchOutcome, SearchError> {
    let mut rng = rng::seeded(cfg.seed);
    run_search_with_rng(inv, aq, prefix, cfg, reward_cfg, &mut rng)
}

pub fn run_search_with_rng<R: Rng>(
    inv: &Inventory,
    aq: &AnnotatedQuery,
    prefix: &Trajectory,
    cfg: &SearchConfig,
    reward_cfg: &RewardConfig,
    rng: &mut R,
) -> Result<SearchOutcome, SearchError> {
    let table = CoverTable::new(inv, aq);
    search_table(&table, &aq.text, prefix, cfg, reward_cfg, rng)
}

/// Search over a prebuilt cover table.
pub fn search_table<R: Rng>(
    table: &CoverTable,
    query: &str,
    prefix: &Trajectory,
    cfg: &SearchConfig,
    reward_cfg: &RewardConfig,
    rng: &mut R,
) -> Result<SearchOutcome, SearchError> {
    cfg.validate()?;
    if prefix.len() >= cfg.max_len {
        return Err(SearchError::PrefixTooLong {
            prefix: prefix.len(),
            max: cfg.max_len,
        });
    }
    let mut root_state = table.empty_state();
    let mut in_prefix = vec![false; table.len()];
    for &x in prefix.labels() {
        if let Some(c) = table.index_of(x) {
            table.apply(&mut root_state, c);
            in_prefix[c] = true;
        }
    }
    let mut available: Vec<usize> = (0..table.len()).filter(|&c| !in_prefix[c]).collect();
    if available.is_empty() {
        return Err(SearchError::NoCandidates { query: query.to_string() });
    }
    let depth = (cfg.max_len - prefix.len()).min(available.len());
    available.shuffle(rng);

    let mut nodes = vec![SearchNode::new(None, usize::MAX, None, 0, available.clone())];
    let mut best_path: Vec<usize> = Vec::new();
    let mut best_reward = f64::NEG_INFINITY;
    let mut path = Vec::with_capacity(depth + 1);
    let mut chosen = Vec::with_capacity(depth);
    let mut used = in_prefix.clone();

    for _ in 0..cfg.simulations {
        path.clear();
        chosen.clear();
        path.push(0);
        let mut state: CoverState = root_state.clone();
        let mut node = 0;
        for d in 0..depth {
            let next = if let Some(c) = nodes[node].untried.pop() {
                used[c] = true;
                for &p in &chosen {
                    used[p] = true;
                }
                let untried = if d + 1 < depth {
                    let mut u: Vec<usize> = available.iter().copied().filter(|&a| !used[a]).collect();
                    u.shuffle(rng);
                    u
                } else {
                    Vec::new()
                };
                used[c] = false;
                for &p in &chosen {
                    used[p] = false;
                }
                let idx = nodes.len();
                nodes.push(SearchNode::new(Some(table.candidates()[c]), c, Some(node), d + 1, untried));
                nodes[node].children.push(idx);
                idx
            } else {
                let parent_visits = nodes[node].visits;
                let mut best = nodes[node].children[0];
                let mut best_v = f64::NEG_INFINITY;
                for &ch in &nodes[node].children {
                    let v = ucb_value(&nodes[ch], parent_visits, cfg.exploration);
                    if v > best_v {
                        best_v = v;
                        best = ch;
                    }
                }
                best
            };
            let c = nodes[next].candidate;
            table.apply(&mut state, c);
            chosen.push(c);
            path.push(next);
            node = next;
        }
        let r = table.total(&state, reward_cfg);
        for &n in &path {
            let nd = &mut nodes[n];
            nd.visits += 1;
            nd.total_reward += r;
            nd.min_reward = nd.min_reward.min(r);
            nd.max_reward = nd.max_reward.max(r);
        }
        if r > best_reward {
            best_reward = r;
            best_path.clone_from(&chosen);
        }
    }

    let visits: BTreeMap<LabelId, u32> = nodes[0]
        .children
        .iter()
        .map(|&ch| (nodes[ch].label.expect("child has a label"), nodes[ch].visits))
        .collect();
    let mut best = prefix.clone();
    for &c in &best_path {
        best.push(table.candidates()[c])?;
    }
    Ok(SearchOutcome {
        policy: SearchPolicy::from_visits(visits, cfg.temperature),
        tree: SearchTree { nodes },
        best,
        best_reward,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Dirichlet-noised multinomial sampling.
    Train,
    /// Argmax with ties to the smallest label id.
    Inference,
}

/// Symmetric Dirichlet sample via normalized Gamma draws. Tiny concentrations
/// can underflow every draw; the limit of that case is a uniformly placed one-hot.
pub fn sample_dirichlet<R: Rng>(alpha: f64, k: usize, rng: &mut R) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    let gamma = Gamma::new(alpha, 1.0).expect("positive shape");
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.into_iter().map(|g| g / total).collect()
    } else {
        let mut out = vec![0.0; k];
        out[rng.random_range(0..k)] = 1.0;
        out
    }
}

/// (1 − w)·π + w·η.
pub fn mix_with_noise(pi: &[f64], eta: &[f64], noise_weight: f64) -> Vec<f64> {
    pi.iter()
        .zip(eta)
        .map(|(p, n)| (1.0 - noise_weight) * p + noise_weight * n)
        .collect()
}

pub fn sample_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

pub fn argmax_label(pi: &BTreeMap<LabelId, f64>) -> LabelId {
    let mut best = None;
    for (&x, &p) in pi {
        match best {
            Some((_, bp)) if p <= bp => {}
            _ => best = Some((x, p)),
        }
    }
    best.expect("non-empty policy").0
}

pub fn sample_action<R: Rng>(policy: &SearchPolicy, cfg: &SearchConfig, mode: SampleMode, rng: &mut R) -> LabelId {
    assert!(!policy.pi.is_empty(), "policy must be non-empty");
    match mode {
        SampleMode::Inference => argmax_label(&policy.pi),
        SampleMode::Train => {
            let labels: Vec<LabelId> = policy.pi.keys().copied().collect();
            let pi: Vec<f64> = policy.pi.values().copied().collect();
            let eta = sample_dirichlet(cfg.dirichlet_alpha, pi.len(), rng);
            let p = mix_with_noise(&pi, &eta, cfg.noise_weight);
            labels[sample_index(&p, rng)]
        }
    }
}

/// One recorded search step: the state (query, prefix) and its target π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub query: String,
    pub prefix: Vec<LabelId>,
    pub pi: BTreeMap<LabelId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub pairs: Vec<TrainingPair>,
    pub trajectory: Trajectory,
    pub reward: f64,
}

/// Searches from every prefix in turn, recording (state, π) and extending the
/// prefix with a noised sample. Stops early when the candidates run out.
pub fn self_play_episode<R: Rng>(
    inv: &Inventory,
    aq: &AnnotatedQuery,
    cfg: &SearchConfig,
    reward_cfg: &RewardConfig,
    rng: &mut R,
) -> Result<Episode, SearchError> {
    let table = CoverTable::new(inv, aq);
    let mut prefix = Trajectory::empty();
    let mut pairs = Vec::with_capacity(cfg.max_len);
    for t in 0..cfg.max_len {
        let outcome = match search_table(&table, &aq.text, &prefix, cfg, reward_cfg, rng) {
            Ok(o) => o,
            Err(SearchError::NoCandidates { .. }) if t > 0 => break,
            Err(e) => return Err(e),
        };
        pairs.push(TrainingPair {
            query: aq.text.clone(),
            prefix: prefix.labels().to_vec(),
            pi: outcome.policy.pi.clone(),
        });
        let x = sample_action(&outcome.policy, cfg, SampleMode::Train, rng);
        prefix.push(x)?;
    }
    let reward = trajectory_reward(inv, aq, &prefix, reward_cfg)?.total;
    Ok(Episode {
        pairs,
        trajectory: prefix,
        reward,
    })
}

/// Self-play over many queries in parallel; query `i` uses the stream
/// `(seed, stream, i)` so results do not depend on scheduling.
pub fn self_play_batch(
    inv: &Inventory,
    queries: &[&AnnotatedQuery],
    cfg: &SearchConfig,
    reward_cfg: &RewardConfig,
    seed: u64,
    stream: u64,
) -> Vec<Result<Episode, SearchError>> {
    queries
        .par_iter()
        .enumerate()
        .map(|(i, aq)| {
            let mut rng = rng::stream(seed, &[stream, i as u64]);
            self_play_episode(inv, aq, cfg, reward_cfg, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inventory::fixture::*;
    use crate::reward::GainConvention;
    use proptest::prelude::*;

    fn node(w: f64, n: u32) -> SearchNode {
        let mut nd = SearchNode::new(None, 0, None, 0, Vec::new());
        nd.total_reward = w;
        nd.visits = n;
        nd
    }

    #[test]
    fn ucb_arithmetic() {
        let v = ucb_value(&node(1.0, 2), 10, 1.0);
        assert!((v - (0.5 + (10f64).ln().sqrt())).abs() < 1e-12);
        assert!((v - 2.017_427_2).abs() < 1e-6);
        assert_eq!(ucb_value(&node(0.0, 0), 10, 1.0), f64::INFINITY);
        assert_eq!(ucb_value(&node(3.0, 3), 10, 0.0), 1.0);
    }

    /// Exhaustive optimum over ordered sequences of distinct candidates.
    fn brute_force_best(table: &CoverTable, n: usize, cfg: &RewardConfig) -> f64 {
        fn go(table: &CoverTable, seq: &mut Vec<usize>, n: usize, cfg: &RewardConfig, best: &mut f64) {
            if seq.len() == n || seq.len() == table.len() {
                *best = best.max(table.reward_of(seq, cfg));
                return;
            }
            for c in 0..table.len() {
                if !seq.contains(&c) {
                    seq.push(c);
                    go(table, seq, n, cfg, best);
                    seq.pop();
                }
            }
        }
        let mut best = f64::NEG_INFINITY;
        go(table, &mut Vec::new(), n, cfg, &mut best);
        best
    }

    #[test]
    fn search_finds_the_fixture_optimum() {
        let (inv, aq) = (f1(), query(&[0, 1, 2]));
        let cfg = SearchConfig {
            simulations: 500,
            max_len: 3,
            seed: 3,
            ..SearchConfig::default()
        };
        let reward = RewardConfig::id3();
        let out = run_search(&inv, &aq, &Trajectory::empty(), &cfg, &reward).unwrap();
        let table = CoverTable::new(&inv, &aq);
        let opt = brute_force_best(&table, 3, &reward);
        assert!((opt - (1.0 + 3f64.ln())).abs() < 1e-12);
        assert!((out.best_reward - opt).abs() < 1e-12);
        assert_eq!(out.tree.root().visits, 500);
        let total: f64 = out.policy.pi.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_candidate_gets_all_mass() {
        let (inv, aq) = (f1(), query(&[2]));
        // Candidates of {s3}: apply and qr code; prefix removes apply.
        let prefix = Trajectory::new(vec![X_APPLY]).unwrap();
        let out = run_search(&inv, &aq, &prefix, &SearchConfig::default(), &RewardConfig::default()).unwrap();
        assert_eq!(out.policy.pi.len(), 1);
        assert_eq!(out.policy.pi[&X_QR], 1.0);
    }

    #[test]
    fn no_candidates_is_an_error() {
        let inv = f1();
        let aq = query(&[0]);
        let prefix = Trajectory::new(vec![X_APPLY, X_CC]).unwrap();
        let err = run_search(&inv, &aq, &prefix, &SearchConfig::default(), &RewardConfig::default()).unwrap_err();
        assert!(matches!(err, SearchError::NoCandidates { .. }));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (inv, aq) = (f1(), query(&[0, 1]));
        for cfg in [
            SearchConfig { simulations: 0, ..SearchConfig::default() },
            SearchConfig { temperature: 0.0, ..SearchConfig::default() },
            SearchConfig { noise_weight: 1.5, ..SearchConfig::default() },
            SearchConfig { max_len: 0, ..SearchConfig::default() },
        ] {
            assert!(matches!(
                run_search(&inv, &aq, &Trajectory::empty(), &cfg, &RewardConfig::default()),
                Err(SearchError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn noise_mixing_arithmetic() {
        let p = mix_with_noise(&[0.6, 0.3, 0.1], &[0.2, 0.5, 0.3], 0.25);
        for (a, b) in p.iter().zip([0.50, 0.35, 0.15]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn inference_mode_takes_argmax_with_low_id_ties() {
        let pi: BTreeMap<LabelId, f64> = [(X_CC, 0.6), (X_LOAN, 0.3), (X_QR, 0.1)].into_iter().collect();
        let policy = SearchPolicy { pi, visits: BTreeMap::new() };
        let mut rng = rng::seeded(0);
        assert_eq!(sample_action(&policy, &SearchConfig::default(), SampleMode::Inference, &mut rng), X_CC);
        let tie: BTreeMap<LabelId, f64> = [(X_QR, 0.5), (X_LOAN, 0.5)].into_iter().collect();
        assert_eq!(argmax_label(&tie), X_LOAN);
    }

    #[test]
    fn empirical_sampling_matches_mixture() {
        let probs = [0.50, 0.35, 0.15];
        let mut rng = rng::seeded(42);
        let mut counts = [0usize; 3];
        let draws = 100_000;
        for _ in 0..draws {
            counts[sample_index(&probs, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(probs) {
            assert!((*c as f64 / draws as f64 - p).abs() < 0.01);
        }
    }

    #[test]
    fn dirichlet_samples_are_distributions() {
        let mut rng = rng::seeded(1);
        for k in 1..10 {
            let eta = sample_dirichlet(0.03, k, &mut rng);
            assert_eq!(eta.len(), k);
            assert!((eta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(eta.iter().all(|&e| e >= 0.0));
        }
    }

    #[test]
    fn episodes_are_deterministic_and_full_length() {
        let corpus = crate::inventory::generate_benchmark(&Default::default(), 5).unwrap();
        let cfg = SearchConfig { simulations: 200, ..SearchConfig::default() };
        let table_ok = corpus
            .queries
            .iter()
            .find(|q| CoverTable::new(&corpus.inventory, q).len() >= 6)
            .unwrap();
        let run = |seed| {
            let mut rng = rng::seeded(seed);
            self_play_episode(&corpus.inventory, table_ok, &cfg, &RewardConfig::id3(), &mut rng).unwrap()
        };
        let a = run(9);
        assert_eq!(a.pairs.len(), 6);
        assert_eq!(a.trajectory.len(), 6);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&run(9)).unwrap());
    }

    #[test]
    fn self_play_beats_random_trajectories() {
        let corpus = crate::inventory::generate_benchmark(&Default::default(), 11).unwrap();
        let inv = &corpus.inventory;
        let cfg = SearchConfig { simulations: 300, ..SearchConfig::default() };
        let reward = RewardConfig::id3();
        let queries: Vec<&AnnotatedQuery> = corpus.queries.iter().take(100).collect();
        let episodes = self_play_batch(inv, &queries, &cfg, &reward, 1, 0);
        let mut rng = rng::seeded(2);
        let (mut sp, mut rnd) = (0.0, 0.0);
        for (aq, ep) in queries.iter().zip(&episodes) {
            sp += ep.as_ref().unwrap().reward;
            let table = CoverTable::new(inv, aq);
            let mut idx: Vec<usize> = (0..table.len()).collect();
            idx.shuffle(&mut rng);
            idx.truncate(6);
            rnd += table.reward_of(&idx, &reward);
        }
        assert!(sp >= rnd, "self-play {sp} < random {rnd}");
    }

    fn small_instance() -> impl Strategy<Value = (Inventory, AnnotatedQuery)> {
        crate::reward::tests::instance()
            .prop_map(|(inv, aq, _)| (inv, aq))
            .prop_filter("needs a candidate", |(inv, aq)| !CoverTable::new(inv, aq).is_empty())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn visit_counts_are_conserved((inv, aq) in small_instance(), sims in 1usize..60, seed in any::<u64>(),
                                      id3 in any::<bool>()) {
            let cfg = SearchConfig { simulations: sims, max_len: 3, seed, ..SearchConfig::default() };
            let reward = if id3 { RewardConfig::id3() } else { RewardConfig::default() };
            let out = run_search(&inv, &aq, &Trajectory::empty(), &cfg, &reward).unwrap();
            let tree = &out.tree;
            prop_assert_eq!(tree.root().visits as usize, sims);
            for (i, nd) in tree.nodes.iter().enumerate() {
                if !nd.children.is_empty() {
                    let sum: u32 = tree.children(i).map(|c| c.visits).sum();
                    prop_assert_eq!(sum, nd.visits);
                }
                if let Some(mean) = nd.mean_reward() {
                    prop_assert!(mean >= nd.min_reward - 1e-9 && mean <= nd.max_reward + 1e-9);
                }
            }
            let total: f64 = out.policy.pi.values().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            // Same seed, same tree.
            let again = run_search(&inv, &aq, &Trajectory::empty(), &cfg, &reward).unwrap();
            prop_assert_eq!(again.policy, out.policy);
            prop_assert_eq!(again.best, out.best);
        }
    }

    #[test]
    fn low_temperature_concentrates_on_most_visited() {
        let visits: BTreeMap<LabelId, u32> = [(X_CC, 10), (X_LOAN, 30), (X_QR, 20)].into_iter().collect();
        let p = SearchPolicy::from_visits(visits, 0.02);
        assert!(p.pi[&X_LOAN] > 0.999);
        assert_eq!(argmax_label(&p.pi), X_LOAN);
        let _ = GainConvention::Paper;
    }
}

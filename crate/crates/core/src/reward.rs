//! Trajectory reward: recall mass of the covered intents plus a weighted
//! information-gain term computed from the marginal covers of each step.
//!
//! All entropies are in nats. [`trajectory_reward`] works on explicit sets and
//! returns every intermediate quantity; [`CoverTable`] is the allocation-free
//! evaluator the tree search calls millions of times.

use crate::inventory::{candidate_labels, intent_probabilities, AnnotatedQuery, IntentId, Inventory, LabelId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("unknown label id {0}")]
    UnknownLabel(u32),
    #[error("label {0} appears twice in the trajectory")]
    DuplicateLabel(u32),
    #[error("trajectory length {len} exceeds the maximum {max}")]
    TooLong { len: usize, max: usize },
}

/// Sign convention for the information-gain term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainConvention {
    /// Σ weighted step entropy − base entropy.
    #[default]
    Paper,
    /// Base entropy − Σ weighted step entropy, as in decision-tree splitting.
    Id3,
}

impl fmt::Display for GainConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GainConvention::Paper => "paper",
            GainConvention::Id3 => "id3",
        })
    }
}

impl FromStr for GainConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(GainConvention::Paper),
            "id3" => Ok(GainConvention::Id3),
            other => Err(format!("unknown gain convention {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub beta: f64,
    pub convention: GainConvention,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            beta: 1.0,
            convention: GainConvention::Paper,
        }
    }
}

impl RewardConfig {
    pub fn recall_only() -> Self {
        RewardConfig {
            beta: 0.0,
            convention: GainConvention::Paper,
        }
    }

    pub fn id3() -> Self {
        RewardConfig {
            beta: 1.0,
            convention: GainConvention::Id3,
        }
    }
}

/// An ordered sequence of distinct labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory(Vec<LabelId>);

impl Trajectory {
    pub fn new(labels: Vec<LabelId>) -> Result<Self, RewardError> {
        let mut seen = HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(*l) {
                return Err(RewardError::DuplicateLabel(l.0));
            }
        }
        Ok(Trajectory(labels))
    }

    pub fn with_max(labels: Vec<LabelId>, max: usize) -> Result<Self, RewardError> {
        if labels.len() > max {
            return Err(RewardError::TooLong { len: labels.len(), max });
        }
        Trajectory::new(labels)
    }

    pub fn empty() -> Self {
        Trajectory(Vec::new())
    }

    pub fn labels(&self) -> &[LabelId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: LabelId) -> bool {
        self.0.contains(&x)
    }

    /// Appends a label; fails if already present.
    pub fn push(&mut self, x: LabelId) -> Result<(), RewardError> {
        if self.contains(x) {
            return Err(RewardError::DuplicateLabel(x.0));
        }
        self.0.push(x);
        Ok(())
    }

    pub fn prefix(&self, len: usize) -> Trajectory {
        Trajectory(self.0[..len].to_vec())
    }
}

impl From<Trajectory> for Vec<LabelId> {
    fn from(t: Trajectory) -> Self {
        t.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    /// S(τ).
    pub covered: BTreeSet<IntentId>,
    /// D(x_t) per step.
    pub marginal_covers: Vec<BTreeSet<IntentId>>,
    /// ℋ(x_t) per step, nats.
    pub step_entropies: Vec<f64>,
    /// ℋ₀, nats.
    pub base_entropy: f64,
    pub info_gain: f64,
    pub recall_mass: f64,
    pub total: f64,
    pub beta: f64,
    pub convention: GainConvention,
}

fn check_label(inv: &Inventory, x: LabelId) -> Result<(), RewardError> {
    inv.label(x).map(|_| ()).ok_or(RewardError::UnknownLabel(x.0))
}

/// ℳ(x) ∩ 𝒬(q).
fn relevant(inv: &Inventory, aq: &AnnotatedQuery, x: LabelId) -> BTreeSet<IntentId> {
    inv.label_intents(x).iter().copied().filter(|s| aq.contains(*s)).collect()
}

/// S(τ) = ⋃ ℳ(x) ∩ 𝒬(q).
pub fn covered_set(inv: &Inventory, aq: &AnnotatedQuery, tau: &Trajectory) -> Result<BTreeSet<IntentId>, RewardError> {
    let mut out = BTreeSet::new();
    for &x in tau.labels() {
        check_label(inv, x)?;
        out.extend(relevant(inv, aq, x));
    }
    Ok(out)
}

/// D(x) = (ℳ(x) ∩ 𝒬(q)) \ S(prefix).
pub fn marginal_cover(
    inv: &Inventory,
    aq: &AnnotatedQuery,
    prefix: &Trajectory,
    x: LabelId,
) -> Result<BTreeSet<IntentId>, RewardError> {
    check_label(inv, x)?;
    let before = covered_set(inv, aq, prefix)?;
    Ok(relevant(inv, aq, x).difference(&before).copied().collect())
}

/// Entropy of P(·|q) renormalized over `cover`; 0 for empty or singleton covers.
pub fn step_entropy(aq: &AnnotatedQuery, cover: &BTreeSet<IntentId>) -> f64 {
    if cover.len() <= 1 {
        return 0.0;
    }
    let p = intent_probabilities(aq);
    let mass: f64 = cover.iter().map(|s| p.get(s).copied().unwrap_or(0.0)).sum();
    if mass <= 0.0 {
        return 0.0;
    }
    -cover
        .iter()
        .map(|s| p.get(s).copied().unwrap_or(0.0) / mass)
        .filter(|&pt| pt > 0.0)
        .map(|pt| pt * pt.ln())
        .sum::<f64>()
}

/// ℋ₀ = −Σ P ln P over 𝒬(q).
pub fn base_entropy(aq: &AnnotatedQuery) -> f64 {
    -intent_probabilities(aq)
        .values()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

fn per_step(
    inv: &Inventory,
    aq: &AnnotatedQuery,
    tau: &Trajectory,
) -> Result<(BTreeSet<IntentId>, Vec<BTreeSet<IntentId>>, Vec<f64>), RewardError> {
    let mut covered = BTreeSet::new();
    let mut covers = Vec::with_capacity(tau.len());
    let mut entropies = Vec::with_capacity(tau.len());
    for &x in tau.labels() {
        check_label(inv, x)?;
        let d: BTreeSet<IntentId> = relevant(inv, aq, x).difference(&covered).copied().collect();
        entropies.push(step_entropy(aq, &d));
        covered.extend(d.iter().copied());
        covers.push(d);
    }
    Ok((covered, covers, entropies))
}

fn gain_from_parts(
    covered: &BTreeSet<IntentId>,
    covers: &[BTreeSet<IntentId>],
    entropies: &[f64],
    h0: f64,
    convention: GainConvention,
) -> f64 {
    let weighted = if covered.is_empty() {
        0.0
    } else {
        let total = covered.len() as f64;
        covers
            .iter()
            .zip(entropies)
            .map(|(d, h)| d.len() as f64 / total * h)
            .sum()
    };
    match convention {
        GainConvention::Paper => weighted - h0,
        GainConvention::Id3 => h0 - weighted,
    }
}

/// Δ(τ) under the given sign convention.
pub fn information_gain(
    inv: &Inventory,
    aq: &AnnotatedQuery,
    tau: &Trajectory,
    convention: GainConvention,
) -> Result<f64, RewardError> {
    let (covered, covers, entropies) = per_step(inv, aq, tau)?;
    Ok(gain_from_parts(&covered, &covers, &entropies, base_entropy(aq), convention))
}

/// R(τ) = Σ_{s∈S(τ)} P(s|q) + β·Δ(τ), with every intermediate quantity.
pub fn trajectory_reward(
    inv: &Inventory,
    aq: &AnnotatedQuery,
    tau: &Trajectory,
    cfg: &RewardConfig,
) -> Result<RewardBreakdown, RewardError> {
    let (covered, covers, entropies) = per_step(inv, aq, tau)?;
    let h0 = base_entropy(aq);
    let info_gain = gain_from_parts(&covered, &covers, &entropies, h0, cfg.convention);
    let p = intent_probabilities(aq);
    let recall_mass: f64 = covered.iter().map(|s| p[s]).sum();
    Ok(RewardBreakdown {
        total: recall_mass + cfg.beta * info_gain,
        covered,
        marginal_covers: covers,
        step_entropies: entropies,
        base_entropy: h0,
        info_gain,
        recall_mass,
        beta: cfg.beta,
        convention: cfg.convention,
    })
}

/// Bitmask view of one query's pruned action space.
///
/// Candidates are indexed `0..len()` in ascending label-id order; intents of
/// 𝒬(q) are local bit positions. Entropies use the closed form ln|D| that the
/// uniform P(s|q) implies.
#[derive(Debug, Clone)]
pub struct CoverTable {
    candidates: Vec<LabelId>,
    words: usize,
    masks: Vec<u64>,
    sizes: Vec<u32>,
    num_potential: usize,
    /// k·ln k for k in 0..=|𝒬(q)|.
    xlogx: Vec<f64>,
    base_entropy: f64,
}

/// Incremental evaluation state for a partial trajectory.
#[derive(Debug, Clone)]
pub struct CoverState {
    covered: Vec<u64>,
    covered_count: u32,
    /// Σ |D_t| ln |D_t|.
    weighted_xlogx: f64,
}

impl CoverTable {
    pub fn new(inv: &Inventory, aq: &AnnotatedQuery) -> Self {
        let candidates: Vec<LabelId> = candidate_labels(inv, aq).into_iter().collect();
        let local: BTreeMap<IntentId, usize> = aq
            .potential_intents()
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, i))
            .collect();
        let n = local.len();
        let words = n.div_ceil(64).max(1);
        let mut masks = vec![0u64; candidates.len() * words];
        let mut sizes = vec![0u32; candidates.len()];
        for (c, &x) in candidates.iter().enumerate() {
            for s in inv.label_intents(x) {
                if let Some(&bit) = local.get(s) {
                    masks[c * words + bit / 64] |= 1 << (bit % 64);
                    sizes[c] += 1;
                }
            }
        }
        let xlogx = (0..=n)
            .map(|k| if k <= 1 { 0.0 } else { k as f64 * (k as f64).ln() })
            .collect();
        CoverTable {
            candidates,
            words,
            masks,
            sizes,
            num_potential: n,
            xlogx,
            base_entropy: (n as f64).ln(),
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[LabelId] {
        &self.candidates
    }

    pub fn index_of(&self, x: LabelId) -> Option<usize> {
        self.candidates.binary_search(&x).ok()
    }

    pub fn num_potential(&self) -> usize {
        self.num_potential
    }

    pub fn base_entropy(&self) -> f64 {
        self.base_entropy
    }

    /// |ℳ(x) ∩ 𝒬(q)| for candidate `c`.
    pub fn relevant_count(&self, c: usize) -> u32 {
        self.sizes[c]
    }

    pub fn empty_state(&self) -> CoverState {
        CoverState {
            covered: vec![0; self.words],
            covered_count: 0,
            weighted_xlogx: 0.0,
        }
    }

    /// Size of D(x) for candidate `c` given the state.
    pub fn marginal_count(&self, state: &CoverState, c: usize) -> u32 {
        let m = &self.masks[c * self.words..(c + 1) * self.words];
        m.iter().zip(&state.covered).map(|(a, b)| (a & !b).count_ones()).sum()
    }

    pub fn apply(&self, state: &mut CoverState, c: usize) {
        let m = &self.masks[c * self.words..(c + 1) * self.words];
        let mut added = 0;
        for (w, a) in state.covered.iter_mut().zip(m) {
            added += (a & !*w).count_ones();
            *w |= a;
        }
        state.covered_count += added;
        state.weighted_xlogx += self.xlogx[added as usize];
    }

    pub fn total(&self, state: &CoverState, cfg: &RewardConfig) -> f64 {
        if self.num_potential == 0 {
            return 0.0;
        }
        let covered = state.covered_count as f64;
        let weighted = if state.covered_count == 0 { 0.0 } else { state.weighted_xlogx / covered };
        let gain = match cfg.convention {
            GainConvention::Paper => weighted - self.base_entropy,
            GainConvention::Id3 => self.base_entropy - weighted,
        };
        covered / self.num_potential as f64 + cfg.beta * gain
    }

    pub fn recall(&self, state: &CoverState) -> f64 {
        state.covered_count as f64 / self.num_potential as f64
    }

    /// Reward of a sequence of candidate indices.
    pub fn reward_of(&self, seq: &[usize], cfg: &RewardConfig) -> f64 {
        let mut st = self.empty_state();
        for &c in seq {
            self.apply(&mut st, c);
        }
        self.total(&st, cfg)
    }

    /// Reward of a label trajectory; labels outside the candidate set cover nothing.
    pub fn reward_of_labels(&self, labels: &[LabelId], cfg: &RewardConfig) -> f64 {
        let mut st = self.empty_state();
        for &x in labels {
            if let Some(c) = self.index_of(x) {
                self.apply(&mut st, c);
            }
        }
        self.total(&st, cfg)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::inventory::fixture::*;
    use crate::inventory::{Intent, Label, Split};
    use proptest::prelude::*;

    fn t(labels: &[LabelId]) -> Trajectory {
        Trajectory::new(labels.to_vec()).unwrap()
    }

    fn ids(v: &[u32]) -> BTreeSet<IntentId> {
        v.iter().map(|&i| IntentId(i)).collect()
    }

    const LN3: f64 = 1.098_612_288_668_109_8;

    #[test]
    fn covered_set_on_fixture() {
        let (inv, aq) = (f1(), query(&[0, 1, 2]));
        assert_eq!(covered_set(&inv, &aq, &t(&[X_CC, X_LOAN])).unwrap(), ids(&[0, 1]));
        assert!(covered_set(&inv, &aq, &t(&[X_CANCEL])).unwrap().is_empty());
        assert_eq!(covered_set(&inv, &aq, &t(&[X_APPLY, X_CC])).unwrap(), ids(&[0, 1, 2]));
        assert_eq!(
            covered_set(&inv, &aq, &t(&[LabelId(99)])),
            Err(RewardError::UnknownLabel(99))
        );
    }

    #[test]
    fn marginal_cover_on_fixture() {
        let (inv, aq) = (f1(), query(&[0, 1, 2]));
        assert_eq!(marginal_cover(&inv, &aq, &t(&[]), X_APPLY).unwrap(), ids(&[0, 1, 2]));
        assert!(marginal_cover(&inv, &aq, &t(&[X_APPLY]), X_CC).unwrap().is_empty());
        assert_eq!(marginal_cover(&inv, &aq, &t(&[X_CC]), X_LOAN).unwrap(), ids(&[1]));
    }

    #[test]
    fn entropies() {
        let aq = query(&[0, 1, 2]);
        assert_eq!(step_entropy(&aq, &ids(&[0])), 0.0);
        assert!((step_entropy(&aq, &ids(&[0, 1, 2])) - LN3).abs() < 1e-12);
        assert_eq!(step_entropy(&aq, &BTreeSet::new()), 0.0);
        assert_eq!(base_entropy(&query(&[0])), 0.0);
        assert!((base_entropy(&aq) - LN3).abs() < 1e-12);
        assert!((base_entropy(&query(&[0, 1, 2, 3])) - 1.386_294_361_119_890_6).abs() < 1e-12);
    }

    #[test]
    fn information_gain_on_fixture() {
        let (inv, aq) = (f1(), query(&[0, 1, 2]));
        let broad = t(&[X_APPLY]);
        assert!(information_gain(&inv, &aq, &broad, GainConvention::Paper).unwrap().abs() < 1e-12);
        assert!(information_gain(&inv, &aq, &broad, GainConvention::Id3).unwrap().abs() < 1e-12);
        let fine = t(&[X_CC, X_LOAN, X_QR]);
        assert!((information_gain(&inv, &aq, &fine, GainConvention::Paper).unwrap() + LN3).abs() < 1e-12);
        assert!((information_gain(&inv, &aq, &fine, GainConvention::Id3).unwrap() - LN3).abs() < 1e-12);
        let useless = t(&[X_CANCEL]);
        assert!((information_gain(&inv, &aq, &useless, GainConvention::Paper).unwrap() + LN3).abs() < 1e-12);
    }

    #[test]
    fn reward_on_fixture() {
        let (inv, aq) = (f1(), query(&[0, 1, 2]));
        let paper = RewardConfig::default();
        let r = trajectory_reward(&inv, &aq, &t(&[X_APPLY]), &paper).unwrap();
        assert_eq!(r.recall_mass, 1.0);
        assert!((r.total - 1.0).abs() < 1e-12);
        let fine = t(&[X_CC, X_LOAN, X_QR]);
        let r = trajectory_reward(&inv, &aq, &fine, &paper).unwrap();
        assert!((r.recall_mass - 1.0).abs() < 1e-12);
        assert!((r.total - (1.0 - LN3)).abs() < 1e-12);
        let r = trajectory_reward(&inv, &aq, &fine, &RewardConfig::id3()).unwrap();
        assert!((r.total - (1.0 + LN3)).abs() < 1e-12);
        let r = trajectory_reward(&inv, &aq, &t(&[X_CANCEL]), &paper).unwrap();
        assert_eq!(r.recall_mass, 0.0);
        assert!((r.total + LN3).abs() < 1e-12);
    }

    #[test]
    fn trajectory_rejects_duplicates_and_overlength() {
        assert!(Trajectory::new(vec![X_CC, X_CC]).is_err());
        assert!(Trajectory::with_max(vec![X_CC, X_LOAN], 1).is_err());
        let mut tr = t(&[X_CC]);
        assert!(tr.push(X_CC).is_err());
        tr.push(X_QR).unwrap();
        assert_eq!(tr.labels(), &[X_CC, X_QR]);
    }

    /// Random inventory, query and trajectory (possibly with non-candidate labels).
    pub(crate) fn instance() -> impl Strategy<Value = (Inventory, AnnotatedQuery, Trajectory)> {
        (2usize..10, 1usize..9).prop_flat_map(|(ni, nl)| {
            (
                proptest::collection::vec(proptest::collection::btree_set(0..ni as u32, 1..=ni.min(4)), nl),
                proptest::collection::btree_set(0..ni as u32, 1..=ni),
                Just(ni),
                Just(nl),
                proptest::sample::subsequence((0..nl as u32).collect::<Vec<_>>(), 0..=nl.min(6)),
                any::<u64>(),
            )
                .prop_map(|(sets, q, ni, _nl, sub, shuffle_seed)| {
                    let intents = (0..ni)
                        .map(|i| Intent {
                            id: IntentId(i as u32),
                            text: format!("i{i}"),
                            answer: String::new(),
                        })
                        .collect();
                    let labels = sets
                        .into_iter()
                        .enumerate()
                        .map(|(i, s)| Label {
                            id: LabelId(i as u32),
                            phrase: format!("l{i}"),
                            intents: s.into_iter().map(IntentId).collect(),
                        })
                        .collect();
                    let inv = Inventory::new(intents, labels).unwrap();
                    let aq = AnnotatedQuery::new("q", q.into_iter().map(IntentId), Split::Train).unwrap();
                    let mut order = sub;
                    use rand::seq::SliceRandom;
                    order.shuffle(&mut crate::rng::seeded(shuffle_seed));
                    let tau = Trajectory::new(order.into_iter().map(LabelId).collect()).unwrap();
                    (inv, aq, tau)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn marginal_covers_partition_the_covered_set((inv, aq, tau) in instance()) {
            let r = trajectory_reward(&inv, &aq, &tau, &RewardConfig::default()).unwrap();
            let mut union = BTreeSet::new();
            for d in &r.marginal_covers {
                for s in d {
                    prop_assert!(union.insert(*s), "covers overlap at {}", s);
                }
            }
            prop_assert_eq!(&union, &r.covered);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&r.recall_mass));
            for (d, h) in r.marginal_covers.iter().zip(&r.step_entropies) {
                let bound = if d.is_empty() { 0.0 } else { (d.len() as f64).ln() };
                prop_assert!(*h >= -1e-12 && *h <= bound + 1e-12);
            }
        }

        #[test]
        fn recall_is_permutation_invariant_and_monotone((inv, aq, tau) in instance()) {
            let cfg = RewardConfig::default();
            let base = trajectory_reward(&inv, &aq, &tau, &cfg).unwrap().recall_mass;
            let mut rev = tau.labels().to_vec();
            rev.reverse();
            let rev = Trajectory::new(rev).unwrap();
            prop_assert!((trajectory_reward(&inv, &aq, &rev, &cfg).unwrap().recall_mass - base).abs() < 1e-12);
            let mut prev = 0.0;
            for n in 0..=tau.len() {
                let r = trajectory_reward(&inv, &aq, &tau.prefix(n), &cfg).unwrap().recall_mass;
                prop_assert!(r + 1e-12 >= prev);
                prev = r;
            }
        }

        #[test]
        fn gain_bounds_under_uniform_p((inv, aq, tau) in instance()) {
            let r = trajectory_reward(&inv, &aq, &tau, &RewardConfig::default()).unwrap();
            prop_assume!(!r.covered.is_empty());
            let h0 = r.base_entropy;
            let paper = information_gain(&inv, &aq, &tau, GainConvention::Paper).unwrap();
            let id3 = information_gain(&inv, &aq, &tau, GainConvention::Id3).unwrap();
            prop_assert!(paper >= -h0 - 1e-12 && paper <= 1e-12);
            prop_assert!(id3 >= -1e-12 && id3 <= h0 + 1e-12);
        }

        #[test]
        fn cover_table_matches_set_evaluator((inv, aq, tau) in instance(), beta in 0.0f64..3.0) {
            let table = CoverTable::new(&inv, &aq);
            for convention in [GainConvention::Paper, GainConvention::Id3] {
                let cfg = RewardConfig { beta, convention };
                let exact = trajectory_reward(&inv, &aq, &tau, &cfg).unwrap().total;
                let fast = table.reward_of_labels(tau.labels(), &cfg);
                prop_assert!((exact - fast).abs() < 1e-9, "{} vs {}", exact, fast);
            }
        }
    }
}

use crate::inventory::{candidate_labels, tokenize, AnnotatedQuery, Inventory, LabelId, TokenizerScheme};
use crate::reward::Trajectory;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecallVariant {
    /// |S(τ)| / |𝒬(q)|.
    #[default]
    Union,
    /// Σ_x |ℳ(x) ∩ 𝒬(q)| / |𝒬(q)|; exceeds 1 when labels overlap.
    Sum,
}

fn hits<'a>(inv: &'a Inventory, aq: &'a AnnotatedQuery, x: LabelId) -> impl Iterator<Item = crate::IntentId> + 'a {
    let ids: &[crate::IntentId] = inv.label(x).map_or(&[], |l| &l.intents);
    ids.iter().copied().filter(move |s| aq.contains(*s))
}

/// Recall of the potential intents by the trajectory's labels. Unknown labels cover nothing.
pub fn recall_at_n(inv: &Inventory, aq: &AnnotatedQuery, tau: &Trajectory, variant: RecallVariant) -> f64 {
    let q = aq.potential_intents().len() as f64;
    match variant {
        RecallVariant::Union => {
            let s: BTreeSet<_> = tau.labels().iter().flat_map(|&x| hits(inv, aq, x)).collect();
            s.len() as f64 / q
        }
        RecallVariant::Sum => tau.labels().iter().map(|&x| hits(inv, aq, x).count()).sum::<usize>() as f64 / q,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    pub recall: f64,
    pub labels: Vec<LabelId>,
    /// Branch and bound ran; otherwise greedy max-coverage (a lower estimate of the optimum).
    pub exact: bool,
}

/// Largest candidate count solved exactly.
pub const EXACT_UPPER_BOUND_MAX: usize = 20;

/// Best union recall reachable with n labels from the query's candidate labels.
pub fn upper_bound(inv: &Inventory, aq: &AnnotatedQuery, n: usize) -> UpperBound {
    let cands: Vec<LabelId> = candidate_labels(inv, aq).into_iter().collect();
    upper_bound_with(inv, aq, n, &cands)
}

/// As [`upper_bound`] but restricted to `labels`.
pub fn upper_bound_with(inv: &Inventory, aq: &AnnotatedQuery, n: usize, labels: &[LabelId]) -> UpperBound {
    let q = aq.potential_intents();
    let pos: BTreeMap<_, _> = q.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let words = q.len().div_ceil(64);
    let mut sets: Vec<(LabelId, Vec<u64>, u32)> = labels
        .iter()
        .map(|&x| {
            let mut bits = vec![0u64; words];
            for s in hits(inv, aq, x) {
                let i = pos[&s];
                bits[i / 64] |= 1 << (i % 64);
            }
            let count = bits.iter().map(|w| w.count_ones()).sum();
            (x, bits, count)
        })
        .filter(|(_, _, c)| *c > 0)
        .collect();
    // Larger covers first, lowest id among equals.
    sets.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)));

    let total = q.len() as f64;
    if sets.len() <= EXACT_UPPER_BOUND_MAX {
        let mut bb = BranchBound {
            sets: &sets,
            n,
            full: q.len() as u32,
            best: 0,
            best_pick: Vec::new(),
            pick: Vec::new(),
        };
        bb.search(0, &vec![0u64; words], 0);
        let mut labels: Vec<LabelId> = bb.best_pick.iter().map(|&i| sets[i].0).collect();
        labels.sort();
        UpperBound {
            recall: bb.best as f64 / total,
            labels,
            exact: true,
        }
    } else {
        let mut covered = vec![0u64; words];
        let mut used = vec![false; sets.len()];
        let mut labels = Vec::new();
        for _ in 0..n {
            let mut best: Option<(usize, u32)> = None;
            for (i, (_, bits, _)) in sets.iter().enumerate() {
                if used[i] {
                    continue;
                }
                let gain: u32 = bits.iter().zip(&covered).map(|(b, c)| (b & !c).count_ones()).sum();
                if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
                    best = Some((i, gain));
                }
            }
            let Some((i, _)) = best else { break };
            used[i] = true;
            for (c, b) in covered.iter_mut().zip(&sets[i].1) {
                *c |= b;
            }
            labels.push(sets[i].0);
        }
        let got: u32 = covered.iter().map(|w| w.count_ones()).sum();
        labels.sort();
        UpperBound {
            recall: got as f64 / total,
            labels,
            exact: false,
        }
    }
}

struct BranchBound<'a> {
    sets: &'a [(LabelId, Vec<u64>, u32)],
    n: usize,
    full: u32,
    best: u32,
    best_pick: Vec<usize>,
    pick: Vec<usize>,
}

impl BranchBound<'_> {
    fn search(&mut self, from: usize, covered: &[u64], count: u32) {
        if count > self.best {
            self.best = count;
            self.best_pick = self.pick.clone();
        }
        if self.best == self.full || self.pick.len() == self.n || from == self.sets.len() {
            return;
        }
        // Sets are sorted by size, so the next ones bound what the rest can add.
        let slots = self.n - self.pick.len();
        let optimistic: u32 = self.sets[from..].iter().take(slots).map(|s| s.2).sum();
        if count + optimistic <= self.best {
            return;
        }
        for i in from..self.sets.len() {
            let bits = &self.sets[i].1;
            let gain: u32 = bits.iter().zip(covered).map(|(b, c)| (b & !c).count_ones()).sum();
            if gain == 0 {
                continue;
            }
            let next: Vec<u64> = covered.iter().zip(bits).map(|(c, b)| c | b).collect();
            self.pick.push(i);
            self.search(i + 1, &next, count + gain);
            self.pick.pop();
            if self.best == self.full {
                return;
            }
        }
    }
}

fn phrase_tokens(inv: &Inventory, tau: &Trajectory, scheme: TokenizerScheme) -> Vec<Vec<String>> {
    tau.labels()
        .iter()
        .filter_map(|&x| inv.label(x))
        .map(|l| tokenize(&l.phrase, scheme))
        .collect()
}

/// C(w): occurrences of each token across all the trajectory's phrases.
fn token_counts(phrases: &[Vec<String>]) -> BTreeMap<&str, usize> {
    let mut c = BTreeMap::new();
    for t in phrases.iter().flatten() {
        *c.entry(t.as_str()).or_insert(0) += 1;
    }
    c
}

/// Distinct tokens over total tokens across the label phrases; 1 when there are no tokens.
pub fn diversity(inv: &Inventory, tau: &Trajectory, scheme: TokenizerScheme) -> f64 {
    let phrases = phrase_tokens(inv, tau, scheme);
    let c = token_counts(&phrases);
    let total: usize = c.values().sum();
    if total == 0 {
        1.0
    } else {
        c.len() as f64 / total as f64
    }
}

/// Weighted share of label tokens that also occur in the query; 0 when there are no tokens.
pub fn overlap(inv: &Inventory, tau: &Trajectory, query: &str, scheme: TokenizerScheme) -> f64 {
    let phrases = phrase_tokens(inv, tau, scheme);
    let c = token_counts(&phrases);
    let q: BTreeSet<String> = tokenize(query, scheme).into_iter().collect();
    let (mut num, mut den) = (0usize, 0usize);
    for p in &phrases {
        let distinct: BTreeSet<&str> = p.iter().map(|s| s.as_str()).collect();
        for t in distinct {
            den += c[t];
            if q.contains(t) {
                num += c[t];
            }
        }
    }
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inventory::fixture::*;
    use crate::inventory::{Intent, Label, Split};
    use crate::reward::tests::instance;
    use crate::IntentId;
    use proptest::prelude::*;

    fn t(labels: &[LabelId]) -> Trajectory {
        Trajectory::new(labels.to_vec()).unwrap()
    }

    /// Inventory whose labels carry the given phrases, each covering intent 0.
    fn phrases(ps: &[&str]) -> Inventory {
        let intents = vec![Intent {
            id: IntentId(0),
            text: "x".into(),
            answer: "y".into(),
        }];
        let labels = ps
            .iter()
            .enumerate()
            .map(|(i, p)| Label {
                id: LabelId(i as u32),
                phrase: p.to_string(),
                intents: vec![IntentId(0)],
            })
            .collect();
        Inventory::new(intents, labels).unwrap()
    }

    fn all(inv: &Inventory) -> Trajectory {
        t(&inv.labels().iter().map(|l| l.id).collect::<Vec<_>>())
    }

    #[test]
    fn recall_variants_on_the_fixture() {
        let (inv, q) = (f1(), query(&[0, 1, 2]));
        assert_eq!(recall_at_n(&inv, &q, &t(&[X_APPLY, X_CC]), RecallVariant::Union), 1.0);
        assert!((recall_at_n(&inv, &q, &t(&[X_APPLY, X_CC]), RecallVariant::Sum) - 4.0 / 3.0).abs() < 1e-15);
        for v in [RecallVariant::Union, RecallVariant::Sum] {
            assert_eq!(recall_at_n(&inv, &q, &t(&[X_CANCEL]), v), 0.0);
            assert!((recall_at_n(&inv, &q, &t(&[X_LOAN]), v) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn upper_bound_on_the_fixture() {
        let (inv, q) = (f1(), query(&[0, 1, 2]));
        let ub = upper_bound(&inv, &q, 1);
        assert_eq!((ub.recall, ub.exact, ub.labels.clone()), (1.0, true, vec![X_APPLY]));
        let ub = upper_bound_with(&inv, &q, 2, &[X_CC, X_LOAN, X_CANCEL]);
        assert!((ub.recall - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(upper_bound(&inv, &q, 0).recall, 0.0);
    }

    #[test]
    fn diversity_hand_counts() {
        let inv = phrases(&["credit card", "loan", "QR code"]);
        assert_eq!(diversity(&inv, &all(&inv), TokenizerScheme::Whitespace), 1.0);
        let inv = phrases(&["apply", "apply card"]);
        assert!((diversity(&inv, &all(&inv), TokenizerScheme::Whitespace) - 2.0 / 3.0).abs() < 1e-15);
        let inv = phrases(&["loan"]);
        assert_eq!(diversity(&inv, &all(&inv), TokenizerScheme::Whitespace), 1.0);
    }

    #[test]
    fn overlap_hand_counts() {
        let ws = TokenizerScheme::Whitespace;
        let inv = phrases(&["apply", "credit card"]);
        assert!((overlap(&inv, &all(&inv), "how to apply", ws) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(overlap(&inv, &all(&inv), "open account", ws), 0.0);
        assert_eq!(overlap(&inv, &all(&inv), "apply for a credit card", ws), 1.0);
        // Repeated tokens count with their cross-phrase multiplicity.
        let inv = phrases(&["apply", "apply card"]);
        assert!((overlap(&inv, &all(&inv), "apply", ws) - 4.0 / 5.0).abs() < 1e-15);
    }

    /// Independent enumeration of every n-subset for the exact upper bound.
    fn brute_upper(inv: &Inventory, aq: &AnnotatedQuery, n: usize) -> f64 {
        let cands: Vec<LabelId> = candidate_labels(inv, aq).into_iter().collect();
        let k = n.min(cands.len());
        let mut best = 0.0f64;
        for mask in 0u32..(1 << cands.len()) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let pick: Vec<LabelId> = (0..cands.len()).filter(|i| mask >> i & 1 == 1).map(|i| cands[i]).collect();
            best = best.max(recall_at_n(inv, aq, &t(&pick), RecallVariant::Union));
        }
        best
    }

    fn disjoint(inv: &Inventory, aq: &AnnotatedQuery, tau: &Trajectory) -> bool {
        let mut seen = BTreeSet::new();
        tau.labels().iter().all(|&x| hits(inv, aq, x).all(|s| seen.insert(s)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn recall_is_monotone_and_dominated((inv, aq, tau) in instance(), n in 0usize..5) {
            let mut last = 0.0;
            for k in 0..=tau.len() {
                let r = recall_at_n(&inv, &aq, &tau.prefix(k), RecallVariant::Union);
                prop_assert!(r >= last - 1e-15 && r <= 1.0);
                last = r;
            }
            if disjoint(&inv, &aq, &tau) {
                let sum = recall_at_n(&inv, &aq, &tau, RecallVariant::Sum);
                prop_assert!((sum - last).abs() < 1e-12);
            }
            let ub = upper_bound(&inv, &aq, tau.len());
            prop_assert!(ub.exact);
            prop_assert!(ub.recall + 1e-12 >= last);
            let exact = upper_bound(&inv, &aq, n);
            prop_assert!((exact.recall - brute_upper(&inv, &aq, n)).abs() < 1e-12);
            prop_assert!(exact.labels.len() <= n);
            prop_assert!((recall_at_n(&inv, &aq, &t(&exact.labels), RecallVariant::Union) - exact.recall).abs() < 1e-12);
        }

        #[test]
        fn complementarity_bounds_and_order((inv, aq, tau) in instance(), rot in 0usize..6) {
            let ws = TokenizerScheme::Whitespace;
            let d = diversity(&inv, &tau, ws);
            prop_assert!(d > 0.0 && d <= 1.0);
            let toks: Vec<String> = tau.labels().iter().flat_map(|&x| tokenize(inv.phrase(x), ws)).collect();
            let distinct: BTreeSet<&String> = toks.iter().collect();
            prop_assert_eq!(d == 1.0, distinct.len() == toks.len());
            let o = overlap(&inv, &tau, &aq.text, ws);
            prop_assert!((0.0..=1.0).contains(&o));
            let mut labels = tau.labels().to_vec();
            if !labels.is_empty() {
                let r = rot % labels.len();
                labels.rotate_left(r);
                labels.reverse();
            }
            let o2 = overlap(&inv, &t(&labels), &aq.text, ws);
            prop_assert!((o - o2).abs() < 1e-15);
        }
    }

    #[test]
    fn greedy_fallback_is_flagged() {
        // 25 singleton labels over 25 intents.
        let intents = (0..25)
            .map(|i| Intent {
                id: IntentId(i),
                text: format!("intent {i}"),
                answer: String::new(),
            })
            .collect();
        let labels = (0..25)
            .map(|i| Label {
                id: LabelId(i),
                phrase: format!("l{i}"),
                intents: vec![IntentId(i)],
            })
            .collect();
        let inv = Inventory::new(intents, labels).unwrap();
        let aq = AnnotatedQuery::new("q", (0..25).map(IntentId), Split::Test).unwrap();
        let ub = upper_bound(&inv, &aq, 6);
        assert!(!ub.exact);
        assert!((ub.recall - 6.0 / 25.0).abs() < 1e-15);
    }
}

use crate::inventory::{tokenize, IntentId, Inventory, TokenizerScheme};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredIntent {
    pub id: IntentId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub hits: Vec<ScoredIntent>,
    /// No query token is in the index; hits are the lowest ids with score 0.
    pub empty_query: bool,
}

impl Retrieval {
    pub fn ids(&self) -> Vec<IntentId> {
        self.hits.iter().map(|h| h.id).collect()
    }
}

/// Second-stage re-ranking hook. The default keeps the lexical order.
pub trait Reranker: Send + Sync {
    fn rerank(&self, query: &str, hits: Vec<ScoredIntent>) -> Vec<ScoredIntent>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoRerank;

impl Reranker for NoRerank {
    fn rerank(&self, _query: &str, hits: Vec<ScoredIntent>) -> Vec<ScoredIntent> {
        hits
    }
}

/// BM25 over intent texts.
#[derive(Clone)]
pub struct RetrievalIndex {
    params: Bm25Params,
    scheme: TokenizerScheme,
    ids: Vec<IntentId>,
    /// Per document: term id → term frequency.
    docs: Vec<HashMap<usize, u32>>,
    doc_len: Vec<f64>,
    avg_len: f64,
    terms: HashMap<String, usize>,
    idf: Vec<f64>,
    reranker: Arc<dyn Reranker>,
}

impl std::fmt::Debug for RetrievalIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RetrievalIndex")
            .field("params", &self.params)
            .field("documents", &self.ids.len())
            .field("terms", &self.terms.len())
            .finish()
    }
}

impl RetrievalIndex {
    pub fn build(inv: &Inventory, params: Bm25Params, scheme: TokenizerScheme) -> Self {
        let mut terms: HashMap<String, usize> = HashMap::new();
        let mut df: Vec<usize> = Vec::new();
        let mut docs = Vec::with_capacity(inv.num_intents());
        let mut doc_len = Vec::with_capacity(inv.num_intents());
        for intent in inv.intents() {
            let toks = tokenize(&intent.text, scheme);
            doc_len.push(toks.len() as f64);
            let mut tf: HashMap<usize, u32> = HashMap::new();
            for t in toks {
                let next = terms.len();
                let id = *terms.entry(t).or_insert(next);
                if id == df.len() {
                    df.push(0);
                }
                *tf.entry(id).or_insert(0) += 1;
            }
            for id in tf.keys() {
                df[*id] += 1;
            }
            docs.push(tf);
        }
        let n = docs.len() as f64;
        let idf = df
            .iter()
            .map(|&d| (1.0 + (n - d as f64 + 0.5) / (d as f64 + 0.5)).ln())
            .collect();
        let avg_len = if docs.is_empty() { 0.0 } else { doc_len.iter().sum::<f64>() / n };
        RetrievalIndex {
            params,
            scheme,
            ids: inv.intents().iter().map(|i| i.id).collect(),
            docs,
            doc_len,
            avg_len,
            terms,
            idf,
            reranker: Arc::new(NoRerank),
        }
    }

    pub fn with_reranker(mut self, reranker: Arc<dyn Reranker>) -> Self {
        self.reranker = reranker;
        self
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// BM25 score of every document, in intent order.
    pub fn scores(&self, query: &str) -> (Vec<f64>, bool) {
        let q: Vec<usize> = tokenize(query, self.scheme)
            .iter()
            .filter_map(|t| self.terms.get(t).copied())
            .collect();
        let Bm25Params { k1, b } = self.params;
        let scores = self
            .docs
            .iter()
            .zip(&self.doc_len)
            .map(|(doc, &len)| {
                let norm = k1 * (1.0 - b + b * len / self.avg_len);
                q.iter()
                    .map(|t| match doc.get(t) {
                        Some(&tf) => {
                            let tf = tf as f64;
                            self.idf[*t] * tf * (k1 + 1.0) / (tf + norm)
                        }
                        None => 0.0,
                    })
                    .sum()
            })
            .collect();
        (scores, q.is_empty())
    }

    /// Top-k intents by descending score; ties go to the lower intent id.
    pub fn retrieve(&self, query: &str, k: usize) -> Retrieval {
        let (scores, empty_query) = self.scores(query);
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(self.ids[a].cmp(&self.ids[b])));
        let hits: Vec<ScoredIntent> = order
            .into_iter()
            .take(k)
            .map(|i| ScoredIntent {
                id: self.ids[i],
                score: scores[i],
            })
            .collect();
        Retrieval {
            hits: self.reranker.rerank(query, hits),
            empty_query,
        }
    }
}

/// Original query with the selected label phrase appended.
pub fn clarified_query(text: &str, phrase: Option<&str>) -> String {
    match phrase {
        Some(p) => format!("{text} {p}"),
        None => text.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inventory::fixture::*;
    use proptest::prelude::*;

    fn index() -> RetrievalIndex {
        RetrievalIndex::build(&f1(), Bm25Params::default(), TokenizerScheme::Whitespace)
    }

    /// Hand evaluation of BM25 for one (query, document) pair on F1.
    #[test]
    fn bm25_matches_hand_scoring() {
        let idx = index();
        // Doc lengths 3,2,3,3 → avgdl 11/4. "credit": df 2, "card": df 2, "apply": df 3.
        let idf = |df: f64| (1.0 + (4.0 - df + 0.5) / (df + 0.5)).ln();
        let tf_part = |len: f64| 2.2 / (1.0 + 1.2 * (0.25 + 0.75 * len / 2.75));
        let s1 = (idf(3.0) + 2.0 * idf(2.0)) * tf_part(3.0);
        let s4 = 2.0 * idf(2.0) * tf_part(3.0);
        let (scores, empty) = idx.scores("how to apply credit card");
        assert!(!empty);
        assert!((scores[0] - s1).abs() < 1e-12);
        assert!((scores[3] - s4).abs() < 1e-12);
        let top = idx.retrieve(&clarified_query("how to apply", Some("credit card")), 3);
        assert_eq!(top.hits[0].id, IntentId(0));
    }

    #[test]
    fn full_text_ranks_first_and_k_is_respected() {
        let idx = index();
        for intent in f1().intents() {
            assert_eq!(idx.retrieve(&intent.text, 3).hits[0].id, intent.id);
        }
        assert!(idx.retrieve("apply", 0).hits.is_empty());
        assert_eq!(idx.retrieve("apply", 10).hits.len(), 4);
    }

    #[test]
    fn empty_query_returns_lowest_ids() {
        let r = index().retrieve("?? zzz", 3);
        assert!(r.empty_query);
        assert_eq!(r.ids(), vec![IntentId(0), IntentId(1), IntentId(2)]);
        assert!(r.hits.iter().all(|h| h.score == 0.0));
    }

    #[test]
    fn none_choice_is_plain_retrieval() {
        let idx = index();
        assert_eq!(idx.retrieve(&clarified_query("how to apply", None), 3), idx.retrieve("how to apply", 3));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn scores_are_non_increasing(words in proptest::collection::vec("(apply|credit|card|loan|qr|code|cancel|x)", 0..6), k in 0usize..6) {
            let idx = index();
            let q = words.join(" ");
            let r = idx.retrieve(&q, k);
            prop_assert_eq!(r.hits.len(), k.min(4));
            for w in r.hits.windows(2) {
                prop_assert!(w[0].score >= w[1].score);
            }
            prop_assert_eq!(r.clone(), idx.retrieve(&q, k));
        }
    }
}

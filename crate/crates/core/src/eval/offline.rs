use super::metrics::{diversity, overlap, recall_at_n, upper_bound, RecallVariant};
use super::{eval_queries, EvalError};
use crate::inventory::{Corpus, TokenizerScheme};
use crate::policy::{Checkpoint, Recommender};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub name: String,
    /// Mean union recall, aligned with the report's `ns`.
    pub recall: Vec<f64>,
    /// Mean sum-variant recall, aligned with `ns`.
    pub recall_sum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRow {
    pub text: String,
    pub potential: usize,
    pub upper_bound: Vec<f64>,
    pub exact: Vec<bool>,
    /// Union recall per method (report order), then per n.
    pub recall: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineReport {
    pub corpus_seed: u64,
    pub inventory_hash: String,
    pub queries: usize,
    pub ns: Vec<usize>,
    pub methods: Vec<MethodRow>,
    pub upper_bound: Vec<f64>,
    /// Share of queries whose bound was solved exactly, per n.
    pub upper_bound_exact: Vec<f64>,
    pub per_query: Vec<QueryRow>,
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

impl OfflineReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn method(&self, name: &str) -> Option<&MethodRow> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn to_table(&self) -> String {
        let width = self.methods.iter().map(|m| m.name.len()).max().unwrap_or(0).max(11);
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "method");
        for n in &self.ns {
            let _ = write!(out, " {:>9}", format!("R@{n}"));
        }
        for n in &self.ns {
            let _ = write!(out, " {:>10}", format!("R@{n} sum"));
        }
        out.push('\n');
        for m in &self.methods {
            let _ = write!(out, "{:<width$}", m.name);
            for r in &m.recall {
                let _ = write!(out, " {:>9}", pct(*r));
            }
            for r in &m.recall_sum {
                let _ = write!(out, " {:>10}", pct(*r));
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<width$}", "upper bound");
        for r in &self.upper_bound {
            let _ = write!(out, " {:>9}", pct(*r));
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{} test queries, corpus seed {}, inventory {}",
            self.queries,
            self.corpus_seed,
            &self.inventory_hash[..self.inventory_hash.len().min(12)]
        );
        out
    }
}

/// Every checkpoint must have been trained on the corpus inventory.
pub fn check_checkpoints(checkpoints: &[Checkpoint], corpus: &Corpus) -> Result<(), EvalError> {
    let found = corpus.inventory.content_hash();
    for c in checkpoints {
        let expected = c.inventory_hash();
        if expected != found {
            return Err(EvalError::InventoryMismatch {
                name: c.name.clone(),
                expected,
                found,
            });
        }
    }
    Ok(())
}

/// Recall@n of every method and the upper bound on the test split.
pub fn run_offline_eval(methods: &[&dyn Recommender], corpus: &Corpus, ns: &[usize]) -> Result<OfflineReport, EvalError> {
    if ns.is_empty() {
        return Err(EvalError::Config("no n values to evaluate".into()));
    }
    let queries = eval_queries(corpus)?;
    let inv = &corpus.inventory;
    let rows: Vec<(QueryRow, Vec<Vec<f64>>)> = queries
        .par_iter()
        .map(|aq| {
            let bounds: Vec<_> = ns.iter().map(|&n| upper_bound(inv, aq, n)).collect();
            let mut union = Vec::with_capacity(methods.len());
            let mut sum = Vec::with_capacity(methods.len());
            for m in methods {
                let (mut u, mut s) = (Vec::new(), Vec::new());
                for &n in ns {
                    let tau = m.recommend(&aq.text, n);
                    u.push(recall_at_n(inv, aq, &tau, RecallVariant::Union));
                    s.push(recall_at_n(inv, aq, &tau, RecallVariant::Sum));
                }
                union.push(u);
                sum.push(s);
            }
            let row = QueryRow {
                text: aq.text.clone(),
                potential: aq.potential_intents().len(),
                upper_bound: bounds.iter().map(|b| b.recall).collect(),
                exact: bounds.iter().map(|b| b.exact).collect(),
                recall: union,
            };
            (row, sum)
        })
        .collect();

    let count = rows.len() as f64;
    let mean_over = |f: &dyn Fn(&(QueryRow, Vec<Vec<f64>>)) -> f64| rows.iter().map(f).sum::<f64>() / count;
    let method_rows = methods
        .iter()
        .enumerate()
        .map(|(mi, m)| MethodRow {
            name: m.name().to_string(),
            recall: (0..ns.len()).map(|k| mean_over(&|r| r.0.recall[mi][k])).collect(),
            recall_sum: (0..ns.len()).map(|k| mean_over(&|r| r.1[mi][k])).collect(),
        })
        .collect();
    let upper = (0..ns.len()).map(|k| mean_over(&|r| r.0.upper_bound[k])).collect();
    let exact = (0..ns.len())
        .map(|k| mean_over(&|r| if r.0.exact[k] { 1.0 } else { 0.0 }))
        .collect();
    Ok(OfflineReport {
        corpus_seed: corpus.seed,
        inventory_hash: inv.content_hash(),
        queries: rows.len(),
        ns: ns.to_vec(),
        methods: method_rows,
        upper_bound: upper,
        upper_bound_exact: exact,
        per_query: rows.into_iter().map(|(r, _)| r).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityRow {
    pub name: String,
    pub diversity: f64,
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityReport {
    pub tokenizer: TokenizerScheme,
    pub n: usize,
    pub queries: usize,
    pub rows: Vec<ComplementarityRow>,
}

impl ComplementarityReport {
    pub fn row(&self, name: &str) -> Option<&ComplementarityRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|m| m.name.len()).max().unwrap_or(0).max(6);
        let mut out = format!("{:<width$} {:>9} {:>9}\n", "method", "div", "overlap");
        for r in &self.rows {
            let _ = writeln!(out, "{:<width$} {:>9} {:>9}", r.name, pct(r.diversity), pct(r.overlap));
        }
        let _ = writeln!(out, "{} test queries, n = {}, tokenizer {}", self.queries, self.n, self.tokenizer);
        out
    }
}

/// Mean diversity and query overlap of each method's n labels on the test split.
pub fn complementarity(
    methods: &[&dyn Recommender],
    corpus: &Corpus,
    n: usize,
    scheme: TokenizerScheme,
) -> Result<ComplementarityReport, EvalError> {
    let queries = eval_queries(corpus)?;
    let inv = &corpus.inventory;
    let rows = methods
        .iter()
        .map(|m| {
            let per: Vec<(f64, f64)> = queries
                .par_iter()
                .map(|aq| {
                    let tau = m.recommend(&aq.text, n);
                    (diversity(inv, &tau, scheme), overlap(inv, &tau, &aq.text, scheme))
                })
                .collect();
            let k = per.len() as f64;
            ComplementarityRow {
                name: m.name().to_string(),
                diversity: per.iter().map(|p| p.0).sum::<f64>() / k,
                overlap: per.iter().map(|p| p.1).sum::<f64>() / k,
            }
        })
        .collect();
    Ok(ComplementarityReport {
        tokenizer: scheme,
        n,
        queries: queries.len(),
        rows,
    })
}

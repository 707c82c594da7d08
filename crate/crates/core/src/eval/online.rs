use super::{eval_queries, EvalError};
use crate::inventory::{Corpus, IntentId, Inventory, LabelId, TokenizerScheme};
use crate::policy::Recommender;
use crate::rng;
use crate::service::{clarified_query, Bm25Params, Resolution, RetrievalIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::{self, Write as _};
use std::str::FromStr;

/// Row name of retrieval without clarification.
pub const TOP_K_ROW: &str = "top-k-intents";

/// Simulated user behaviour when shown a label list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClickModel {
    /// Clicks a label mapping to the latent intent, uniformly among such labels.
    Oracle,
    /// As the oracle, but only clicks with probability `p`.
    NoisyOracle { p: f64 },
}

impl fmt::Display for ClickModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClickModel::Oracle => f.write_str("oracle"),
            ClickModel::NoisyOracle { p } => write!(f, "noisy-oracle(p={p})"),
        }
    }
}

impl FromStr for ClickModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(ClickModel::Oracle),
            "noisy-oracle" => Ok(ClickModel::NoisyOracle { p: 0.9 }),
            other => Err(format!("unknown click model {other:?}")),
        }
    }
}

/// The random draws of one simulated session, shared by every method so rows
/// are compared on identical users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionScript {
    pub query: String,
    pub latent: IntentId,
    /// Decides whether a noisy user clicks at all.
    pub click_u: f64,
    /// Picks among the labels that match the latent intent.
    pub choice_u: f64,
}

/// `count` sessions over the test split: a query uniformly, then a latent intent uniformly from its 𝒬(q).
pub fn session_scripts(corpus: &Corpus, count: usize, seed: u64) -> Result<Vec<SessionScript>, EvalError> {
    let queries = eval_queries(corpus)?;
    Ok((0..count)
        .map(|i| {
            let mut r = rng::stream(seed, &[0x5e55, i as u64]);
            let aq = queries[r.random_range(0..queries.len())];
            let q = aq.potential_intents();
            SessionScript {
                query: aq.text.clone(),
                latent: q[r.random_range(0..q.len())],
                click_u: r.random(),
                choice_u: r.random(),
            }
        })
        .collect())
}

/// The label the simulated user clicks, or `None` for none-of-the-above.
pub fn oracle_click(inv: &Inventory, shown: &[LabelId], script: &SessionScript, model: ClickModel) -> Option<LabelId> {
    let hits: Vec<LabelId> = shown
        .iter()
        .copied()
        .filter(|&x| inv.label(x).is_some_and(|l| l.intents.binary_search(&script.latent).is_ok()))
        .collect();
    if hits.is_empty() {
        return None;
    }
    if let ClickModel::NoisyOracle { p } = model {
        if script.click_u >= p {
            return None;
        }
    }
    let i = ((script.choice_u * hits.len() as f64) as usize).min(hits.len() - 1);
    Some(hits[i])
}

/// The user picks the latent intent when it is shown, otherwise asks for a human.
pub fn session_outcome(shown: &[IntentId], script: &SessionScript) -> Resolution {
    if shown.contains(&script.latent) {
        Resolution::Intent(script.latent)
    } else {
        Resolution::Transfer
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub sessions: usize,
    pub seed: u64,
    pub click_model: ClickModel,
    pub labels_per_session: usize,
    pub intents_per_round: usize,
    pub bm25: Bm25Params,
    pub tokenizer: TokenizerScheme,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            sessions: 10_000,
            seed: 11,
            click_model: ClickModel::Oracle,
            labels_per_session: 6,
            intents_per_round: 3,
            bm25: Bm25Params::default(),
            tokenizer: TokenizerScheme::Whitespace,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub name: String,
    pub t: u64,
    pub c: u64,
    pub ctr: f64,
    pub n: u64,
    pub m: u64,
    pub tha: f64,
}

impl SimRow {
    fn new(name: &str, t: u64, c: u64, n: u64, m: u64) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        SimRow {
            name: name.to_string(),
            t,
            c,
            ctr: ratio(c, t),
            n,
            m,
            tha: ratio(m, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub click_model: ClickModel,
    pub seed: u64,
    pub sessions: usize,
    pub rows: Vec<SimRow>,
}

impl SimReport {
    pub fn row(&self, name: &str) -> Option<&SimRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|m| m.name.len()).max().unwrap_or(0).max(6);
        let mut out = format!("{:<width$} {:>8} {:>8} {:>8}\n", "method", "CTR", "THA", "sessions");
        for r in &self.rows {
            let ctr = if r.t == 0 { "-".to_string() } else { format!("{:.2}%", 100.0 * r.ctr) };
            let _ = writeln!(out, "{:<width$} {:>8} {:>7.2}% {:>8}", r.name, ctr, 100.0 * r.tha, r.n);
        }
        let _ = writeln!(out, "click model {}, seed {}", self.click_model, self.seed);
        out
    }
}

/// Runs every method, plus retrieval without clarification, over the same scripted sessions.
pub fn simulate_online(methods: &[&dyn Recommender], corpus: &Corpus, cfg: &SimConfig) -> Result<SimReport, EvalError> {
    if let ClickModel::NoisyOracle { p } = cfg.click_model {
        if !(0.0..=1.0).contains(&p) {
            return Err(EvalError::Config(format!("click probability {p} is outside [0, 1]")));
        }
    }
    let scripts = session_scripts(corpus, cfg.sessions, cfg.seed)?;
    let inv = &corpus.inventory;
    let index = RetrievalIndex::build(inv, cfg.bm25, cfg.tokenizer);
    let k = cfg.intents_per_round;
    let labels = cfg.labels_per_session.min(inv.num_labels());

    let mut rows = Vec::with_capacity(methods.len() + 1);
    for m in methods {
        let (c, transfers) = scripts
            .par_iter()
            .map(|s| {
                let shown = m.recommend(&s.query, labels);
                let click = oracle_click(inv, shown.labels(), s, cfg.click_model);
                let query = clarified_query(&s.query, click.map(|x| inv.phrase(x)));
                let found = index.retrieve(&query, k).ids();
                let transfer = session_outcome(&found, s) == Resolution::Transfer;
                (click.is_some() as u64, transfer as u64)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        let t = scripts.len() as u64;
        rows.push(SimRow::new(m.name(), t, c, t, transfers));
    }
    let transfers = scripts
        .par_iter()
        .map(|s| (session_outcome(&index.retrieve(&s.query, k).ids(), s) == Resolution::Transfer) as u64)
        .sum();
    rows.push(SimRow::new(TOP_K_ROW, 0, 0, scripts.len() as u64, transfers));
    Ok(SimReport {
        click_model: cfg.click_model,
        seed: cfg.seed,
        sessions: cfg.sessions,
        rows,
    })
}

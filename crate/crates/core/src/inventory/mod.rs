//! Intent and label inventory, annotated corpora, and their file formats.
//!
//! Inventory file (JSON):
//! `{"intents":[{"id","text","answer"}], "labels":[{"id","phrase","intents":[ids]}]}`
//!
//! Corpus directory: `inventory.json`, `corpus.jsonl` (one
//! `{"text","intent_ids","split"}` object per line) and `meta.json`.

mod generate;
mod tokenize;

pub use generate::{generate_benchmark, generate_benchmark_detailed, Attribute, Benchmark, GeneratorConfig};
pub use tokenize::{tokenize, TokenizerScheme};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntentId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelId(pub u32);

impl IntentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl LabelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for IntentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum InventoryError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {what}: {message}")]
    Parse { what: String, message: String },
    #[error("invalid {record}: {message}")]
    Invalid { record: String, message: String },
    #[error("generator config: {0}")]
    Config(String),
}

impl InventoryError {
    fn invalid(record: impl Into<String>, message: impl Into<String>) -> Self {
        InventoryError::Invalid {
            record: record.into(),
            message: message.into(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        InventoryError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub id: IntentId,
    pub text: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub id: LabelId,
    pub phrase: String,
    /// ℳ(x), sorted ascending.
    pub intents: Vec<IntentId>,
}

#[derive(Serialize, Deserialize)]
struct InventoryFile {
    intents: Vec<Intent>,
    labels: Vec<Label>,
}

/// The closed-domain universe of intents and labels with the many-to-many
/// map between them. Immutable once validated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inventory {
    intents: Vec<Intent>,
    labels: Vec<Label>,
    intent_to_labels: Vec<Vec<LabelId>>,
}

impl Inventory {
    /// Validates and indexes raw records. Records may arrive in any order but
    /// their ids must be exactly `0..len` per kind.
    pub fn new(mut intents: Vec<Intent>, mut labels: Vec<Label>) -> Result<Self, InventoryError> {
        intents.sort_by_key(|i| i.id);
        labels.sort_by_key(|l| l.id);

        let mut seen = HashSet::new();
        for (pos, intent) in intents.iter().enumerate() {
            let record = format!("intent {}", intent.id.0);
            if intent.id.index() != pos {
                return Err(InventoryError::invalid(record, "intent ids must be contiguous from 0"));
            }
            if intent.text.trim().is_empty() {
                return Err(InventoryError::invalid(record, "empty text"));
            }
            if !seen.insert(intent.text.as_str()) {
                return Err(InventoryError::invalid(record, format!("duplicate text {:?}", intent.text)));
            }
        }

        let mut seen = HashSet::new();
        let mut intent_to_labels = vec![Vec::new(); intents.len()];
        for (pos, label) in labels.iter_mut().enumerate() {
            let record = format!("label {}", label.id.0);
            if label.id.index() != pos {
                return Err(InventoryError::invalid(record, "label ids must be contiguous from 0"));
            }
            if label.phrase.trim().is_empty() {
                return Err(InventoryError::invalid(record, "empty phrase"));
            }
            if !seen.insert(label.phrase.clone()) {
                return Err(InventoryError::invalid(record, format!("duplicate phrase {:?}", label.phrase)));
            }
            if label.intents.is_empty() {
                return Err(InventoryError::invalid(record, "label maps to no intent"));
            }
            label.intents.sort();
            for w in label.intents.windows(2) {
                if w[0] == w[1] {
                    return Err(InventoryError::invalid(record, format!("duplicate intent {}", w[0].0)));
                }
            }
            for &s in &label.intents {
                match intent_to_labels.get_mut(s.index()) {
                    Some(list) => list.push(label.id),
                    None => {
                        return Err(InventoryError::invalid(
                            record,
                            format!("references unknown intent id {}", s.0),
                        ))
                    }
                }
            }
        }

        Ok(Inventory {
            intents,
            labels,
            intent_to_labels,
        })
    }

    pub fn intents(&self) -> &[Intent] {
        &self.intents
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn num_intents(&self) -> usize {
        self.intents.len()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn intent(&self, id: IntentId) -> Option<&Intent> {
        self.intents.get(id.index())
    }

    pub fn label(&self, id: LabelId) -> Option<&Label> {
        self.labels.get(id.index())
    }

    pub fn phrase(&self, id: LabelId) -> &str {
        &self.labels[id.index()].phrase
    }

    /// ℳ(x).
    pub fn label_intents(&self, id: LabelId) -> &[IntentId] {
        &self.labels[id.index()].intents
    }

    /// Inverse of ℳ.
    pub fn intent_labels(&self, id: IntentId) -> &[LabelId] {
        &self.intent_to_labels[id.index()]
    }

    pub fn label_by_phrase(&self, phrase: &str) -> Option<LabelId> {
        self.labels.iter().find(|l| l.phrase == phrase).map(|l| l.id)
    }

    pub fn to_json(&self) -> String {
        let file = InventoryFile {
            intents: self.intents.clone(),
            labels: self.labels.clone(),
        };
        serde_json::to_string_pretty(&file).expect("inventory serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, InventoryError> {
        let file: InventoryFile = serde_json::from_str(text).map_err(|e| InventoryError::Parse {
            what: "inventory".into(),
            message: e.to_string(),
        })?;
        Inventory::new(file.intents, file.labels)
    }

    /// SHA-256 of the canonical JSON form; used to match checkpoints to corpora.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), InventoryError> {
        fs::write(path, self.to_json()).map_err(|e| InventoryError::io(path, e))
    }
}

pub fn load_inventory(path: &Path) -> Result<Inventory, InventoryError> {
    let text = fs::read_to_string(path).map_err(|e| InventoryError::io(path, e))?;
    Inventory::from_json(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// An ambiguous query with its annotated potential-intent set 𝒬(q).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedQuery {
    pub text: String,
    potential: Vec<IntentId>,
    pub split: Split,
}

impl AnnotatedQuery {
    pub fn new(
        text: impl Into<String>,
        potential: impl IntoIterator<Item = IntentId>,
        split: Split,
    ) -> Result<Self, InventoryError> {
        let text = text.into();
        let set: BTreeSet<IntentId> = potential.into_iter().collect();
        if set.is_empty() {
            return Err(InventoryError::invalid(
                format!("query {text:?}"),
                "potential intent set is empty",
            ));
        }
        Ok(AnnotatedQuery {
            text,
            potential: set.into_iter().collect(),
            split,
        })
    }

    /// 𝒬(q), sorted ascending.
    pub fn potential_intents(&self) -> &[IntentId] {
        &self.potential
    }

    pub fn contains(&self, s: IntentId) -> bool {
        self.potential.binary_search(&s).is_ok()
    }

    /// Indicator vector 𝐈(q) over the whole inventory.
    pub fn indicator(&self, num_intents: usize) -> Vec<u8> {
        let mut v = vec![0; num_intents];
        for s in &self.potential {
            v[s.index()] = 1;
        }
        v
    }
}

/// Labels whose intent set meets 𝒬(q): the pruned action space.
pub fn candidate_labels(inv: &Inventory, aq: &AnnotatedQuery) -> BTreeSet<LabelId> {
    aq.potential_intents()
        .iter()
        .flat_map(|&s| inv.intent_labels(s).iter().copied())
        .collect()
}

/// P(s|q): uniform over 𝒬(q).
pub fn intent_probabilities(aq: &AnnotatedQuery) -> BTreeMap<IntentId, f64> {
    let p = 1.0 / aq.potential.len() as f64;
    aq.potential.iter().map(|&s| (s, p)).collect()
}

#[derive(Serialize, Deserialize)]
struct QueryRecord {
    text: String,
    intent_ids: Vec<IntentId>,
    split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub seed: u64,
    pub generator: Option<GeneratorConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub inventory: Arc<Inventory>,
    pub queries: Vec<AnnotatedQuery>,
    pub seed: u64,
    pub generator: Option<GeneratorConfig>,
}

impl Corpus {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &AnnotatedQuery> {
        self.queries.iter().filter(move |q| q.split == split)
    }

    pub fn train(&self) -> Vec<&AnnotatedQuery> {
        self.split(Split::Train).collect()
    }

    pub fn test(&self) -> Vec<&AnnotatedQuery> {
        self.split(Split::Test).collect()
    }

    pub fn validate(&self) -> Result<(), InventoryError> {
        for q in &self.queries {
            for s in q.potential_intents() {
                if self.inventory.intent(*s).is_none() {
                    return Err(InventoryError::invalid(
                        format!("query {:?}", q.text),
                        format!("references unknown intent id {}", s.0),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn queries_to_jsonl(&self) -> String {
        let mut out = String::new();
        for q in &self.queries {
            let rec = QueryRecord {
                text: q.text.clone(),
                intent_ids: q.potential.clone(),
                split: q.split,
            };
            out.push_str(&serde_json::to_string(&rec).expect("query serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<(), InventoryError> {
        fs::create_dir_all(dir).map_err(|e| InventoryError::io(dir, e))?;
        self.inventory.save(&dir.join("inventory.json"))?;
        let path = dir.join("corpus.jsonl");
        let mut f = fs::File::create(&path).map_err(|e| InventoryError::io(&path, e))?;
        f.write_all(self.queries_to_jsonl().as_bytes())
            .map_err(|e| InventoryError::io(&path, e))?;
        let meta = CorpusMeta {
            seed: self.seed,
            generator: self.generator.clone(),
        };
        let path = dir.join("meta.json");
        fs::write(&path, serde_json::to_string_pretty(&meta).expect("meta serializes"))
            .map_err(|e| InventoryError::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self, InventoryError> {
        let inventory = Arc::new(load_inventory(&dir.join("inventory.json"))?);
        let path = dir.join("corpus.jsonl");
        let f = fs::File::open(&path).map_err(|e| InventoryError::io(&path, e))?;
        let mut queries = Vec::new();
        for (lineno, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| InventoryError::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: QueryRecord = serde_json::from_str(&line).map_err(|e| InventoryError::Parse {
                what: format!("corpus.jsonl line {}", lineno + 1),
                message: e.to_string(),
            })?;
            queries.push(AnnotatedQuery::new(rec.text, rec.intent_ids, rec.split)?);
        }
        let meta_path = dir.join("meta.json");
        let meta = match fs::read_to_string(&meta_path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| InventoryError::Parse {
                what: "meta.json".into(),
                message: e.to_string(),
            })?,
            Err(_) => CorpusMeta {
                seed: 0,
                generator: None,
            },
        };
        let corpus = Corpus {
            inventory,
            queries,
            seed: meta.seed,
            generator: meta.generator,
        };
        corpus.validate()?;
        Ok(corpus)
    }
}

//! JSON checkpoint container. Parameter blocks are little-endian f32, base64 encoded.

use super::baselines::{greedy_recommend, nst_recommend};
use super::model::{ClassifierModel, PolicyModel};
use super::net::{Arch, ClassifierParams, ParamSet, PolicyParams};
use super::tensor::Matrix;
use super::vocab::Vocab;
use super::PolicyError;
use crate::inventory::Inventory;
use crate::reward::{RewardConfig, Trajectory};
use crate::rng;
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rl,
    Greedy,
    Supervised,
    Nst,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rl => "rl",
            Method::Greedy => "greedy",
            Method::Supervised => "supervised",
            Method::Nst => "nst",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rl" => Ok(Method::Rl),
            "greedy" => Ok(Method::Greedy),
            "supervised" => Ok(Method::Supervised),
            "nst" => Ok(Method::Nst),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckpointModel {
    Policy(PolicyModel),
    Classifier(ClassifierModel),
}

/// A trained model bundled with the inventory it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub method: Method,
    /// Display name, e.g. "rl-id3".
    pub name: String,
    pub reward: Option<RewardConfig>,
    pub model: CheckpointModel,
    pub inventory: Arc<Inventory>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct BlockFile {
    name: String,
    rows: usize,
    cols: usize,
    data: String,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    method: Method,
    name: String,
    seed: u64,
    reward: Option<RewardConfig>,
    arch: Arch,
    vocab: Vec<String>,
    blocks: Vec<BlockFile>,
    inventory_hash: String,
    inventory: serde_json::Value,
}

fn encode_block(name: &str, m: &Matrix) -> BlockFile {
    let mut bytes = Vec::with_capacity(m.data.len() * 4);
    for &x in &m.data {
        bytes.extend_from_slice(&(x as f32).to_le_bytes());
    }
    BlockFile {
        name: name.to_string(),
        rows: m.rows,
        cols: m.cols,
        data: STANDARD.encode(bytes),
    }
}

fn decode_blocks<P: ParamSet>(mut params: P, blocks: &[BlockFile]) -> Result<P, PolicyError> {
    let names: Vec<&'static str> = params.blocks().iter().map(|(n, _)| *n).collect();
    if names.len() != blocks.len() {
        return Err(PolicyError::Checkpoint(format!(
            "expected {} parameter blocks, found {}",
            names.len(),
            blocks.len()
        )));
    }
    for ((target, name), block) in params.blocks_mut().into_iter().zip(names).zip(blocks) {
        if block.name != name || block.rows != target.rows || block.cols != target.cols {
            return Err(PolicyError::Checkpoint(format!(
                "block {} ({}x{}) does not match expected {name} ({}x{})",
                block.name, block.rows, block.cols, target.rows, target.cols
            )));
        }
        let bytes = STANDARD
            .decode(&block.data)
            .map_err(|e| PolicyError::Checkpoint(format!("block {name}: {e}")))?;
        if bytes.len() != target.data.len() * 4 {
            return Err(PolicyError::Checkpoint(format!("block {name} has {} bytes", bytes.len())));
        }
        for (x, chunk) in target.data.iter_mut().zip(bytes.chunks_exact(4)) {
            *x = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
        }
    }
    Ok(params)
}

impl Checkpoint {
    pub fn new(method: Method, name: impl Into<String>, reward: Option<RewardConfig>, model: CheckpointModel, inventory: Arc<Inventory>) -> Self {
        let seed = match &model {
            CheckpointModel::Policy(m) => m.seed,
            CheckpointModel::Classifier(m) => m.seed,
        };
        Checkpoint {
            method,
            name: name.into(),
            reward,
            model,
            inventory,
            seed,
        }
    }

    pub fn inventory_hash(&self) -> String {
        self.inventory.content_hash()
    }

    pub fn to_json(&self) -> String {
        let (arch, vocab, blocks) = match &self.model {
            CheckpointModel::Policy(m) => (&m.arch, &m.vocab, m.params.blocks()),
            CheckpointModel::Classifier(m) => (&m.arch, &m.vocab, m.params.blocks()),
        };
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            method: self.method,
            name: self.name.clone(),
            seed: self.seed,
            reward: self.reward.clone(),
            arch: arch.clone(),
            vocab: vocab.tokens().to_vec(),
            blocks: blocks.iter().map(|(n, m)| encode_block(n, m)).collect(),
            inventory_hash: self.inventory_hash(),
            inventory: serde_json::from_str(&self.inventory.to_json()).expect("inventory JSON"),
        };
        serde_json::to_string(&file).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let file: CheckpointFile = serde_json::from_str(text).map_err(|e| PolicyError::Checkpoint(e.to_string()))?;
        if file.version != CHECKPOINT_VERSION {
            return Err(PolicyError::Checkpoint(format!("unsupported version {}", file.version)));
        }
        let inventory = Inventory::from_json(&file.inventory.to_string()).map_err(|e| PolicyError::Checkpoint(e.to_string()))?;
        if inventory.content_hash() != file.inventory_hash {
            return Err(PolicyError::InventoryMismatch {
                expected: file.inventory_hash,
                found: inventory.content_hash(),
            });
        }
        if file.vocab.len() != file.arch.vocab_size {
            return Err(PolicyError::Checkpoint("vocabulary size does not match the architecture".into()));
        }
        let vocab = Vocab::from_tokens(file.vocab, file.arch.tokenizer);
        let arch = file.arch;
        // Zero-initialized shapes; the stream is irrelevant because every block is overwritten.
        let mut shape_rng = rng::seeded(0);
        let model = match file.method {
            Method::Rl | Method::Supervised => {
                let params = decode_blocks(PolicyParams::new(&arch, &mut shape_rng).zeros_like(), &file.blocks)?;
                CheckpointModel::Policy(PolicyModel {
                    arch,
                    vocab,
                    params,
                    seed: file.seed,
                })
            }
            Method::Greedy | Method::Nst => {
                let params = decode_blocks(ClassifierParams::new(&arch, &mut shape_rng).zeros_like(), &file.blocks)?;
                CheckpointModel::Classifier(ClassifierModel {
                    arch,
                    vocab,
                    params,
                    seed: file.seed,
                })
            }
        };
        Ok(Checkpoint {
            method: file.method,
            name: file.name,
            reward: file.reward,
            model,
            inventory: Arc::new(inventory),
            seed: file.seed,
        })
    }

    /// SHA-256 of the serialized checkpoint.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        fs::write(path, self.to_json()).map_err(|source| PolicyError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let text = fs::read_to_string(path).map_err(|source| PolicyError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Fails when the checkpoint was trained on a different inventory.
    pub fn check_inventory(&self, inv: &Inventory) -> Result<(), PolicyError> {
        let (expected, found) = (self.inventory_hash(), inv.content_hash());
        if expected == found {
            Ok(())
        } else {
            Err(PolicyError::InventoryMismatch { expected, found })
        }
    }

    /// n labels for a free-text query, decoded the way the method prescribes.
    pub fn recommend(&self, text: &str, n: usize) -> Trajectory {
        match (&self.model, self.method) {
            (CheckpointModel::Policy(m), _) => m.decode(text, n),
            (CheckpointModel::Classifier(m), Method::Greedy) => greedy_recommend(m, &self.inventory, text, n),
            (CheckpointModel::Classifier(m), _) => nst_recommend(m, text, n),
        }
    }
}

//! Lexical intent retrieval and the clarification session engine behind the HTTP API.
//!
//! Every incoming question is clarified; there is no upstream ambiguity
//! classifier routing only some questions here.

mod engine;
mod log;
mod retrieval;
mod session;

pub use self::log::{replay, EventLog, LogRecord, Replay};
pub use engine::{Engine, Metrics, Resolution, SessionStart};
pub use retrieval::{clarified_query, Bm25Params, NoRerank, Reranker, Retrieval, RetrievalIndex, ScoredIntent};
pub use session::{Counters, Session, SessionEvent, SessionStatus};

use crate::inventory::{IntentId, LabelId, TokenizerScheme};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("the service has no model loaded")]
    NotInitialized,
    #[error("query text is empty")]
    EmptyQuery,
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {session} is {status}; {action} is not allowed")]
    InvalidTransition {
        session: String,
        status: SessionStatus,
        action: &'static str,
    },
    #[error("label {0} was not offered in this session")]
    LabelNotShown(LabelId),
    #[error("intent {0} was not offered in this session")]
    IntentNotShown(IntentId),
    #[error("invalid service config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {detail}")]
    Log { path: PathBuf, line: usize, detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub labels_per_session: usize,
    pub intents_per_round: usize,
    /// Label rounds allowed before a session must be transferred.
    pub max_rounds: u32,
    pub bm25: Bm25Params,
    pub tokenizer: TokenizerScheme,
    /// Directory for the daily event logs; in-memory only when absent.
    pub log_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            labels_per_session: 6,
            intents_per_round: 3,
            max_rounds: 3,
            bm25: Bm25Params::default(),
            tokenizer: TokenizerScheme::Whitespace,
            log_dir: None,
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.labels_per_session == 0 || self.intents_per_round == 0 {
            return Err(ServiceError::Config("label and intent counts must be positive".into()));
        }
        if self.max_rounds == 0 {
            return Err(ServiceError::Config("max_rounds must be at least 1".into()));
        }
        if !(self.bm25.k1 >= 0.0) || !(0.0..=1.0).contains(&self.bm25.b) {
            return Err(ServiceError::Config("BM25 needs k1 ≥ 0 and b in [0, 1]".into()));
        }
        Ok(())
    }
}

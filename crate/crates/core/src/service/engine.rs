use super::log::{replay, EventLog, LogRecord};
use super::retrieval::{clarified_query, Retrieval, RetrievalIndex};
use super::session::{Counters, Session, SessionEvent};
use super::{ServiceConfig, ServiceError};
use crate::inventory::{IntentId, Inventory, LabelId};
use crate::policy::Recommender;
use chrono::Utc;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub t: u64,
    pub c: u64,
    /// c / t, 0 before any label list is shown.
    pub ctr: f64,
    pub n: u64,
    pub m: u64,
    /// m / n, 0 before any session closes.
    pub tha: f64,
}

impl Metrics {
    pub fn from_counts(t: u64, c: u64, n: u64, m: u64) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Metrics {
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
pub struct SessionStart {
    pub session_id: String,
    pub labels: Vec<LabelId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Intent(IntentId),
    Transfer,
}

/// The two-stage pipeline: label suggestion, then retrieval on the clarified query.
pub struct Engine {
    cfg: ServiceConfig,
    recommender: Arc<dyn Recommender>,
    inventory: Arc<Inventory>,
    index: RetrievalIndex,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    counters: Counters,
    next_id: AtomicU64,
    log: Option<EventLog>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("checkpoint", &self.recommender.name())
            .field("cfg", &self.cfg)
            .finish()
    }
}

fn session_id(seq: u64) -> String {
    format!("s{seq:08}")
}

impl Engine {
    /// Builds the index and, when a log directory is configured, restores
    /// sessions and counters from it.
    pub fn new(recommender: Arc<dyn Recommender>, inventory: Arc<Inventory>, cfg: ServiceConfig) -> Result<Self, ServiceError> {
        cfg.validate()?;
        let index = RetrievalIndex::build(&inventory, cfg.bm25, cfg.tokenizer);
        let (sessions, counters, log) = match &cfg.log_dir {
            Some(dir) => {
                let restored = replay(dir)?;
                let sessions = restored
                    .sessions
                    .into_iter()
                    .map(|(k, v)| (k, Arc::new(Mutex::new(v))))
                    .collect();
                (sessions, restored.counters, Some(EventLog::open(dir.clone())?))
            }
            None => (HashMap::new(), Counters::default(), None),
        };
        let next = sessions
            .keys()
            .filter_map(|k: &String| k.strip_prefix('s').and_then(|d| d.parse::<u64>().ok()))
            .max()
            .map_or(0, |m| m + 1);
        Ok(Engine {
            cfg,
            recommender,
            inventory,
            index,
            sessions: RwLock::new(sessions),
            counters,
            next_id: AtomicU64::new(next),
            log,
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    pub fn inventory(&self) -> &Arc<Inventory> {
        &self.inventory
    }

    pub fn index(&self) -> &RetrievalIndex {
        &self.index
    }

    pub fn checkpoint_id(&self) -> &str {
        self.recommender.name()
    }

    fn record(&self, session: &mut Session, ev: SessionEvent) -> Result<(), ServiceError> {
        session.check(&ev)?;
        if let Some(log) = &self.log {
            log.append(&LogRecord {
                ts: Utc::now(),
                session: session.id.clone(),
                checkpoint: session.checkpoint.clone(),
                event: ev.clone(),
            })?;
        }
        self.counters.observe(&ev);
        session.apply(ev)
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    /// Opens a session and shows up to `labels_per_session` labels; the
    /// none-of-the-above option is always implicitly available.
    pub fn start_session(&self, text: &str) -> Result<SessionStart, ServiceError> {
        if text.trim().is_empty() {
            return Err(ServiceError::EmptyQuery);
        }
        let id = session_id(self.next_id.fetch_add(1, Ordering::SeqCst));
        let mut session = Session::new(id.clone(), self.checkpoint_id());
        let n = self.cfg.labels_per_session.min(self.inventory.num_labels());
        let labels = self.recommender.recommend(text, n).labels().to_vec();
        self.record(&mut session, SessionEvent::UserMessage { text: text.to_string() })?;
        self.record(&mut session, SessionEvent::LabelsShown { labels: labels.clone() })?;
        self.sessions
            .write()
            .expect("session table lock")
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(SessionStart { session_id: id, labels })
    }

    /// Records the user's label choice and shows the top intents for the clarified query.
    pub fn select_label(&self, id: &str, choice: Option<LabelId>) -> Result<Retrieval, ServiceError> {
        let cell = self.get(id)?;
        let mut session = cell.lock().expect("session lock");
        self.record(&mut session, SessionEvent::LabelSelected { label: choice })?;
        let query = clarified_query(&session.query, choice.map(|x| self.inventory.phrase(x)));
        let found = self.index.retrieve(&query, self.cfg.intents_per_round);
        self.record(&mut session, SessionEvent::IntentsShown { intents: found.ids() })?;
        Ok(found)
    }

    pub fn resolve(&self, id: &str, outcome: Resolution) -> Result<Session, ServiceError> {
        let cell = self.get(id)?;
        let mut session = cell.lock().expect("session lock");
        let ev = match outcome {
            Resolution::Intent(s) => SessionEvent::IntentSelected { intent: s },
            Resolution::Transfer => SessionEvent::Transferred,
        };
        self.record(&mut session, ev)?;
        Ok(session.clone())
    }

    pub fn session(&self, id: &str) -> Result<Session, ServiceError> {
        Ok(self.get(id)?.lock().expect("session lock").clone())
    }

    pub fn metrics(&self) -> Metrics {
        let (t, c, n, m) = self.counters.snapshot();
        Metrics::from_counts(t, c, n, m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inventory::fixture::*;
    use crate::reward::Trajectory;
    use crate::service::{replay, SessionStatus};

    /// Always recommends the listed labels.
    struct Fixed(Vec<LabelId>);

    impl Recommender for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }

        fn recommend(&self, _text: &str, n: usize) -> Trajectory {
            Trajectory::new(self.0.iter().copied().take(n).collect()).unwrap()
        }
    }

    fn engine(cfg: ServiceConfig) -> Engine {
        let labels = vec![X_APPLY, X_CC, X_LOAN, X_QR, X_CANCEL];
        Engine::new(Arc::new(Fixed(labels)), Arc::new(f1()), cfg).unwrap()
    }

    #[test]
    fn label_list_is_clipped_to_inventory() {
        let e = engine(ServiceConfig::default());
        let s = e.start_session("how to apply").unwrap();
        assert_eq!(s.labels.len(), 5);
        let again = e.start_session("how to apply").unwrap();
        assert_eq!(s.labels, again.labels);
        assert_ne!(s.session_id, again.session_id);
        assert!(matches!(e.start_session("  "), Err(ServiceError::EmptyQuery)));
    }

    #[test]
    fn clicked_phrase_is_appended_to_the_query() {
        let e = engine(ServiceConfig::default());
        let s = e.start_session("how to apply").unwrap();
        let r = e.select_label(&s.session_id, Some(X_CC)).unwrap();
        assert_eq!(r.hits.len(), 3);
        assert_eq!(r.hits[0].id, IntentId(0));
        assert!(matches!(
            e.select_label(&s.session_id, Some(X_CC)),
            Err(ServiceError::InvalidTransition { .. })
        ));

        let s = e.start_session("how to apply").unwrap();
        let r = e.select_label(&s.session_id, None).unwrap();
        assert_eq!(r, e.index().retrieve("how to apply", 3));
    }

    #[test]
    fn unshown_label_is_rejected() {
        let cfg = ServiceConfig {
            labels_per_session: 2,
            ..ServiceConfig::default()
        };
        let e = engine(cfg);
        let s = e.start_session("how to apply").unwrap();
        assert!(matches!(
            e.select_label(&s.session_id, Some(X_QR)),
            Err(ServiceError::LabelNotShown(_))
        ));
        assert!(matches!(e.select_label("nope", None), Err(ServiceError::UnknownSession(_))));
    }

    #[test]
    fn resolution_updates_counters_once() {
        let e = engine(ServiceConfig::default());
        let a = e.start_session("how to apply").unwrap();
        e.select_label(&a.session_id, Some(X_LOAN)).unwrap();
        assert!(matches!(
            e.resolve(&a.session_id, Resolution::Intent(IntentId(3))),
            Err(ServiceError::IntentNotShown(_))
        ));
        let closed = e.resolve(&a.session_id, Resolution::Transfer).unwrap();
        assert_eq!(closed.status, SessionStatus::Transferred);
        assert!(e.resolve(&a.session_id, Resolution::Transfer).is_err());
        let m = e.metrics();
        assert_eq!((m.t, m.c, m.n, m.m), (1, 1, 1, 1));

        let b = e.start_session("how to apply").unwrap();
        let shown = e.select_label(&b.session_id, None).unwrap();
        e.resolve(&b.session_id, Resolution::Intent(shown.hits[0].id)).unwrap();
        let m = e.metrics();
        assert_eq!((m.t, m.c, m.n, m.m), (2, 1, 2, 1));
        assert_eq!((m.ctr, m.tha), (0.5, 0.5));
    }

    #[test]
    fn log_replay_restores_sessions_and_counters() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ServiceConfig {
            log_dir: Some(dir.path().to_path_buf()),
            ..ServiceConfig::default()
        };
        let e = engine(cfg.clone());
        let a = e.start_session("how to apply").unwrap();
        e.select_label(&a.session_id, Some(X_CC)).unwrap();
        e.resolve(&a.session_id, Resolution::Transfer).unwrap();
        let b = e.start_session("qr code").unwrap();
        let before = e.metrics();
        let open = e.session(&b.session_id).unwrap();

        let restored = replay(dir.path()).unwrap();
        assert_eq!(restored.records, 7);
        assert_eq!(restored.sessions[&b.session_id], open);

        let e2 = engine(cfg);
        assert_eq!(e2.metrics(), before);
        let c = e2.start_session("loan").unwrap();
        assert_ne!(c.session_id, a.session_id);
        assert_ne!(c.session_id, b.session_id);
        e2.select_label(&b.session_id, None).unwrap();
    }

    #[test]
    fn corrupt_transcript_fails_replay() {
        let dir = tempfile::tempdir().unwrap();
        let log = EventLog::open(dir.path()).unwrap();
        log.append(&LogRecord {
            ts: Utc::now(),
            session: "s1".into(),
            checkpoint: "ck".into(),
            event: SessionEvent::Transferred,
        })
        .unwrap();
        assert!(matches!(replay(dir.path()), Err(ServiceError::Log { line: 1, .. })));
    }
}

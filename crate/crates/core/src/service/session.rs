use super::ServiceError;
use crate::inventory::{IntentId, LabelId};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Open,
    LabelsShown,
    IntentsShown,
    Resolved,
    Transferred,
}

impl SessionStatus {
    pub fn is_closed(self) -> bool {
        matches!(self, SessionStatus::Resolved | SessionStatus::Transferred)
    }
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionStatus::Open => "open",
            SessionStatus::LabelsShown => "labels_shown",
            SessionStatus::IntentsShown => "intents_shown",
            SessionStatus::Resolved => "resolved",
            SessionStatus::Transferred => "transferred",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    UserMessage { text: String },
    LabelsShown { labels: Vec<LabelId> },
    /// `None` is the none-of-the-above option.
    LabelSelected { label: Option<LabelId> },
    IntentsShown { intents: Vec<IntentId> },
    IntentSelected { intent: IntentId },
    Transferred,
}

impl SessionEvent {
    fn action(&self) -> &'static str {
        match self {
            SessionEvent::UserMessage { .. } => "user_message",
            SessionEvent::LabelsShown { .. } => "labels_shown",
            SessionEvent::LabelSelected { .. } => "label_selected",
            SessionEvent::IntentsShown { .. } => "intents_shown",
            SessionEvent::IntentSelected { .. } => "intent_selected",
            SessionEvent::Transferred => "transferred",
        }
    }
}

/// One clarification dialogue and its transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub checkpoint: String,
    pub query: String,
    pub status: SessionStatus,
    /// Label rounds shown so far.
    pub round: u32,
    pub events: Vec<SessionEvent>,
    pub shown_labels: Vec<LabelId>,
    /// The user's answer to the current label round, once given.
    pub selection: Option<Option<LabelId>>,
    pub shown_intents: Vec<IntentId>,
}

impl Session {
    pub fn new(id: impl Into<String>, checkpoint: impl Into<String>) -> Self {
        Session {
            id: id.into(),
            checkpoint: checkpoint.into(),
            query: String::new(),
            status: SessionStatus::Open,
            round: 0,
            events: Vec::new(),
            shown_labels: Vec::new(),
            selection: None,
            shown_intents: Vec::new(),
        }
    }

    /// Rejects any event the state machine does not admit in the current state.
    pub fn check(&self, ev: &SessionEvent) -> Result<(), ServiceError> {
        let illegal = || ServiceError::InvalidTransition {
            session: self.id.clone(),
            status: self.status,
            action: ev.action(),
        };
        let opened = !self.events.is_empty();
        match (self.status, ev) {
            (SessionStatus::Open, SessionEvent::UserMessage { .. }) if !opened => Ok(()),
            (SessionStatus::Open, SessionEvent::LabelsShown { .. }) if opened => Ok(()),
            (SessionStatus::LabelsShown, SessionEvent::LabelSelected { label }) if self.selection.is_none() => match label {
                Some(x) if !self.shown_labels.contains(x) => Err(ServiceError::LabelNotShown(*x)),
                _ => Ok(()),
            },
            (SessionStatus::LabelsShown, SessionEvent::IntentsShown { .. }) if self.selection.is_some() => Ok(()),
            (SessionStatus::IntentsShown, SessionEvent::IntentSelected { intent }) => {
                if self.shown_intents.contains(intent) {
                    Ok(())
                } else {
                    Err(ServiceError::IntentNotShown(*intent))
                }
            }
            (SessionStatus::IntentsShown, SessionEvent::Transferred) => Ok(()),
            _ => Err(illegal()),
        }
    }

    pub fn apply(&mut self, ev: SessionEvent) -> Result<(), ServiceError> {
        self.check(&ev)?;
        match &ev {
            SessionEvent::UserMessage { text } => self.query = text.clone(),
            SessionEvent::LabelsShown { labels } => {
                self.shown_labels = labels.clone();
                self.round += 1;
                self.status = SessionStatus::LabelsShown;
            }
            SessionEvent::LabelSelected { label } => self.selection = Some(*label),
            SessionEvent::IntentsShown { intents } => {
                self.shown_intents = intents.clone();
                self.status = SessionStatus::IntentsShown;
            }
            SessionEvent::IntentSelected { .. } => self.status = SessionStatus::Resolved,
            SessionEvent::Transferred => self.status = SessionStatus::Transferred,
        }
        self.events.push(ev);
        Ok(())
    }

    /// Rebuilds a session from its transcript, validating every step.
    pub fn from_events(
        id: impl Into<String>,
        checkpoint: impl Into<String>,
        events: impl IntoIterator<Item = SessionEvent>,
    ) -> Result<Self, ServiceError> {
        let mut s = Session::new(id, checkpoint);
        for ev in events {
            s.apply(ev)?;
        }
        Ok(s)
    }
}

/// Service-wide CTR/THA counters: t label lists shown, c label clicks,
/// n closed sessions, m transfers.
#[derive(Debug, Default)]
pub struct Counters {
    t: AtomicU64,
    c: AtomicU64,
    n: AtomicU64,
    m: AtomicU64,
}

impl Counters {
    pub fn observe(&self, ev: &SessionEvent) {
        match ev {
            SessionEvent::LabelsShown { .. } => {
                self.t.fetch_add(1, Ordering::SeqCst);
            }
            SessionEvent::LabelSelected { label: Some(_) } => {
                self.c.fetch_add(1, Ordering::SeqCst);
            }
            SessionEvent::IntentSelected { .. } => {
                self.n.fetch_add(1, Ordering::SeqCst);
            }
            SessionEvent::Transferred => {
                self.n.fetch_add(1, Ordering::SeqCst);
                self.m.fetch_add(1, Ordering::SeqCst);
            }
            _ => {}
        }
    }

    /// (t, c, n, m).
    pub fn snapshot(&self) -> (u64, u64, u64, u64) {
        (
            self.t.load(Ordering::SeqCst),
            self.c.load(Ordering::SeqCst),
            self.n.load(Ordering::SeqCst),
            self.m.load(Ordering::SeqCst),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn happy_path(transfer: bool) -> Vec<SessionEvent> {
        vec![
            SessionEvent::UserMessage { text: "how to apply".into() },
            SessionEvent::LabelsShown {
                labels: vec![LabelId(1), LabelId(2)],
            },
            SessionEvent::LabelSelected { label: Some(LabelId(2)) },
            SessionEvent::IntentsShown {
                intents: vec![IntentId(0), IntentId(3)],
            },
            if transfer {
                SessionEvent::Transferred
            } else {
                SessionEvent::IntentSelected { intent: IntentId(3) }
            },
        ]
    }

    #[test]
    fn legal_paths_close_the_session() {
        let s = Session::from_events("a", "ck", happy_path(false)).unwrap();
        assert_eq!(s.status, SessionStatus::Resolved);
        assert_eq!(s.round, 1);
        let s = Session::from_events("a", "ck", happy_path(true)).unwrap();
        assert_eq!(s.status, SessionStatus::Transferred);
    }

    #[test]
    fn stale_and_foreign_choices_are_rejected() {
        let mut s = Session::from_events("a", "ck", happy_path(false)[..3].to_vec()).unwrap();
        assert!(matches!(
            s.apply(SessionEvent::LabelSelected { label: None }),
            Err(ServiceError::InvalidTransition { .. })
        ));
        let mut s = Session::from_events("a", "ck", happy_path(false)[..2].to_vec()).unwrap();
        assert!(matches!(
            s.apply(SessionEvent::LabelSelected { label: Some(LabelId(9)) }),
            Err(ServiceError::LabelNotShown(LabelId(9)))
        ));
        let mut s = Session::from_events("a", "ck", happy_path(false)[..4].to_vec()).unwrap();
        assert!(matches!(
            s.apply(SessionEvent::IntentSelected { intent: IntentId(1) }),
            Err(ServiceError::IntentNotShown(IntentId(1)))
        ));
        let mut s = Session::from_events("a", "ck", happy_path(true)).unwrap();
        assert!(s.apply(SessionEvent::Transferred).is_err());
    }

    #[test]
    fn counters_follow_events() {
        let c = Counters::default();
        for ev in happy_path(true).iter().chain(&happy_path(false)) {
            c.observe(ev);
        }
        assert_eq!(c.snapshot(), (2, 2, 2, 1));
    }

    fn any_event() -> impl Strategy<Value = SessionEvent> {
        prop_oneof![
            Just(SessionEvent::UserMessage { text: "q".into() }),
            Just(SessionEvent::LabelsShown {
                labels: vec![LabelId(0), LabelId(1)]
            }),
            prop::option::of(0u32..3).prop_map(|l| SessionEvent::LabelSelected { label: l.map(LabelId) }),
            Just(SessionEvent::IntentsShown {
                intents: vec![IntentId(0), IntentId(1)]
            }),
            (0u32..3).prop_map(|i| SessionEvent::IntentSelected { intent: IntentId(i) }),
            Just(SessionEvent::Transferred),
        ]
    }

    fn rank(s: SessionStatus) -> u8 {
        match s {
            SessionStatus::Open => 0,
            SessionStatus::LabelsShown => 1,
            SessionStatus::IntentsShown => 2,
            SessionStatus::Resolved | SessionStatus::Transferred => 3,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        /// Whatever is thrown at it, a session only moves forward along the
        /// linear path and every accepted transcript replays to the same state.
        #[test]
        fn only_the_linear_path_is_admitted(events in prop::collection::vec(any_event(), 0..12)) {
            let mut s = Session::new("p", "ck");
            for ev in events {
                let before = s.status;
                if s.apply(ev).is_ok() {
                    prop_assert!(rank(s.status) == rank(before) || rank(s.status) == rank(before) + 1);
                    prop_assert!(!before.is_closed());
                }
            }
            let replayed = Session::from_events("p", "ck", s.events.clone()).unwrap();
            prop_assert_eq!(&replayed, &s);
            prop_assert!(s.round <= 1);
            let kinds: Vec<&str> = s.events.iter().map(|e| e.action()).collect();
            let full = ["user_message", "labels_shown", "label_selected", "intents_shown"];
            prop_assert_eq!(&kinds[..kinds.len().min(4)], &full[..kinds.len().min(4)]);
        }
    }
}

use super::session::{Counters, Session, SessionEvent};
use super::ServiceError;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub ts: DateTime<Utc>,
    pub session: String,
    pub checkpoint: String,
    pub event: SessionEvent,
}

/// Append-only JSON-lines log, one file per UTC day.
#[derive(Debug)]
pub struct EventLog {
    dir: PathBuf,
    open: Mutex<Option<(String, File)>>,
}

fn file_name(day: &str) -> String {
    format!("events-{day}.jsonl")
}

fn io_err(path: &Path, source: std::io::Error) -> ServiceError {
    ServiceError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl EventLog {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(EventLog {
            dir,
            open: Mutex::new(None),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append(&self, record: &LogRecord) -> Result<(), ServiceError> {
        let day = record.ts.format("%Y-%m-%d").to_string();
        let mut guard = self.open.lock().expect("log lock");
        if guard.as_ref().map(|(d, _)| d != &day).unwrap_or(true) {
            let path = self.dir.join(file_name(&day));
            let f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|e| io_err(&path, e))?;
            *guard = Some((day.clone(), f));
        }
        let (_, f) = guard.as_mut().expect("opened above");
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        f.write_all(line.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| io_err(&self.dir.join(file_name(&day)), e))
    }
}

/// Sessions and counters rebuilt from a log directory.
#[derive(Debug, Default)]
pub struct Replay {
    pub sessions: BTreeMap<String, Session>,
    pub counters: Counters,
    pub records: usize,
}

/// Reads every daily log in date order and re-applies the events through the
/// session state machine; an illegal transcript is an error.
pub fn replay(dir: &Path) -> Result<Replay, ServiceError> {
    let mut out = Replay::default();
    if !dir.exists() {
        return Ok(out);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("events-") && n.ends_with(".jsonl"))
        })
        .collect();
    files.sort();
    for path in files {
        let f = File::open(&path).map_err(|e| io_err(&path, e))?;
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| io_err(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |detail: String| ServiceError::Log {
                path: path.clone(),
                line: i + 1,
                detail,
            };
            let rec: LogRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            let session = out
                .sessions
                .entry(rec.session.clone())
                .or_insert_with(|| Session::new(rec.session.clone(), rec.checkpoint.clone()));
            session.apply(rec.event.clone()).map_err(|e| bad(e.to_string()))?;
            out.counters.observe(&rec.event);
            out.records += 1;
        }
    }
    Ok(out)
}

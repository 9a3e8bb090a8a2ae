//! Session index and the append-only per-session logs.
//!
//! Each session owns `<dir>/<id>.jsonl`, one [`Event`] per line. An event is
//! written before it is applied in memory, so a restart that replays every
//! log rebuilds the same sessions with the same pending offers.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use fishmonger::audit::AuditConfig;

use crate::error::PlayError;
use crate::session::{
    AuditReport, CreateRequest, CreatedView, DecisionOutcome, Event, FinishReason, FinishView,
    HistoryView, OfferResponse, Session, DEFAULT_ROUND_CAP,
};

struct Entry {
    session: Session,
    log: Option<File>,
}

impl Entry {
    fn append(&mut self, event: &Event) -> Result<(), PlayError> {
        if let Some(file) = self.log.as_mut() {
            let mut line = serde_json::to_vec(event).map_err(std::io::Error::other)?;
            line.push(b'\n');
            file.write_all(&line)?;
            file.sync_data()?;
        }
        Ok(())
    }

    /// Writes the finished event for a session that hit its cap.
    fn settle_cap(&mut self) -> Result<(), PlayError> {
        if self.session.cap_reached() {
            if let Some(event) = self.session.finish_event(FinishReason::RoundCap) {
                self.append(&event)?;
                self.session.close(FinishReason::RoundCap);
            }
        }
        Ok(())
    }
}

pub struct SessionStore {
    dir: Option<PathBuf>,
    default_round_cap: u64,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
    audit: AuditConfig,
}

impl SessionStore {
    /// Sessions live in memory only.
    pub fn in_memory() -> Self {
        SessionStore {
            dir: None,
            default_round_cap: DEFAULT_ROUND_CAP,
            sessions: RwLock::new(HashMap::new()),
            audit: AuditConfig::default(),
        }
    }

    /// Opens (creating if needed) a log directory and restores every
    /// session found in it.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, PlayError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let events = recover_log(&path)?;
            let session = Session::restore(&events)?;
            let log = OpenOptions::new().append(true).open(&path)?;
            let mut entry = Entry {
                session,
                log: Some(log),
            };
            entry.settle_cap()?;
            sessions.insert(entry.session.id().to_string(), Arc::new(Mutex::new(entry)));
        }
        Ok(SessionStore {
            dir: Some(dir),
            default_round_cap: DEFAULT_ROUND_CAP,
            sessions: RwLock::new(sessions),
            audit: AuditConfig::default(),
        })
    }

    pub fn with_default_round_cap(mut self, cap: u64) -> Self {
        self.default_round_cap = cap;
        self
    }

    pub fn with_audit_config(mut self, audit: AuditConfig) -> Self {
        self.audit = audit;
        self
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session index poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Entry>>, PlayError> {
        self.sessions
            .read()
            .expect("session index poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| PlayError::SessionNotFound(id.to_string()))
    }

    fn with_entry<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Entry) -> Result<T, PlayError>,
    ) -> Result<T, PlayError> {
        let entry = self.get(id)?;
        let mut guard = entry.lock().expect("session poisoned");
        f(&mut guard)
    }

    pub fn create(&self, req: CreateRequest) -> Result<CreatedView, PlayError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let seed = req.seed.unwrap_or_else(rand::random);
        let cap = req.round_cap.unwrap_or(self.default_round_cap);
        let (session, event) = Session::create(id.clone(), req.curve, seed, cap)?;
        let log = match &self.dir {
            Some(dir) => Some(
                OpenOptions::new()
                    .create_new(true)
                    .append(true)
                    .open(dir.join(format!("{id}.jsonl")))?,
            ),
            None => None,
        };
        let mut entry = Entry { session, log };
        entry.append(&event)?;
        let view = entry.session.created_view();
        self.sessions
            .write()
            .expect("session index poisoned")
            .insert(id, Arc::new(Mutex::new(entry)));
        Ok(view)
    }

    pub fn offer(&self, id: &str) -> Result<OfferResponse, PlayError> {
        self.with_entry(id, |e| e.session.offer_view())
    }

    pub fn decide(
        &self,
        id: &str,
        accept: bool,
        token: Option<&str>,
    ) -> Result<DecisionOutcome, PlayError> {
        self.with_entry(id, |e| match e.session.prepare_decision(accept, token)? {
            Ok(repeat) => Ok(repeat),
            Err(event) => {
                e.append(&event)?;
                let outcome = e.session.commit_decision(&event)?;
                e.settle_cap()?;
                Ok(outcome)
            }
        })
    }

    /// Ends the session; repeated calls return the same view.
    pub fn finish(&self, id: &str) -> Result<FinishView, PlayError> {
        self.with_entry(id, |e| {
            if let Some(event) = e.session.finish_event(FinishReason::Requested) {
                e.append(&event)?;
                e.session.close(FinishReason::Requested);
            }
            e.session.finish_view()
        })
    }

    pub fn history(&self, id: &str) -> Result<HistoryView, PlayError> {
        self.with_entry(id, |e| Ok(e.session.history_view()))
    }

    pub fn audit(&self, id: &str) -> Result<AuditReport, PlayError> {
        let config = self.audit;
        self.with_entry(id, |e| e.session.audit(&config))
    }
}

/// Parses session log text. A torn final line (crash mid-write) is
/// dropped; the second value is the byte length of the intact prefix.
pub fn parse_log(text: &str) -> Result<(Vec<Event>, usize), PlayError> {
    let mut events = Vec::new();
    let mut offset = 0;
    let mut lines = text.split_inclusive('\n').enumerate().peekable();
    while let Some((i, line)) = lines.next() {
        let last = lines.peek().is_none();
        if !line.trim().is_empty() {
            match serde_json::from_str::<Event>(line.trim_end()) {
                Ok(ev) if line.ends_with('\n') => events.push(ev),
                Err(err) if !last => {
                    return Err(PlayError::CorruptLog {
                        line: i + 1,
                        reason: err.to_string(),
                    })
                }
                _ => break,
            }
        }
        offset += line.len();
    }
    Ok((events, offset))
}

/// Reads a session log without modifying it.
pub fn read_log(path: &Path) -> Result<Vec<Event>, PlayError> {
    Ok(parse_log(&fs::read_to_string(path)?)?.0)
}

/// Reads a log and cuts a torn final line off the file so that later
/// appends start on a clean line.
fn recover_log(path: &Path) -> Result<Vec<Event>, PlayError> {
    let text = fs::read_to_string(path)?;
    let (events, intact) = parse_log(&text)?;
    if intact < text.len() {
        OpenOptions::new().write(true).open(path)?.set_len(intact as u64)?;
    }
    Ok(events)
}

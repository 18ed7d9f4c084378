//! In-memory session store backed by one JSON-lines journal per session.
//!
//! Journal layout: a `created` event, then one `recorded` event per accepted
//! measurement. Replay feeds the records back through the decision engine, so
//! the store is a pure function of the journals.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use entdetect_core::decision::{Entry, WhatIf};
use entdetect_core::{DecisionPolicy, PauliString, Session, SessionStatus, Strategy};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no session {0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Core(#[from] entdetect_core::Error),
    #[error("journal: {0}")]
    Io(#[from] std::io::Error),
}

pub type StoreResult<T> = Result<T, StoreError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: Uuid,
    pub created_at: DateTime<Utc>,
    pub n_qubits: usize,
    pub threshold: f64,
    pub strategy: Strategy,
}

/// One journal line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        v: u32,
        #[serde(flatten)]
        meta: SessionMeta,
    },
    Recorded {
        v: u32,
        #[serde(flatten)]
        entry: Entry,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub v: u32,
    #[serde(flatten)]
    pub meta: SessionMeta,
    pub status: SessionStatus,
    pub sum: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sum_stderr: Option<f64>,
    pub next_setting: Option<PauliString>,
    pub detection_step: Option<usize>,
    pub log: Vec<Entry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub v: u32,
    pub status: SessionStatus,
    pub sum: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sum_stderr: Option<f64>,
    pub next_setting: Option<PauliString>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Tree,
    Random,
}

/// `"tree"`, `"random"`, or a full strategy object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Mode {
    Name(ModeName),
    Strategy(Strategy),
}

/// Parameters fixed at creation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewSession {
    pub n_qubits: usize,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub mode: Option<Mode>,
}

impl Mode {
    /// A bare `"random"` gets its shuffle seed from `fresh`, which is then stored.
    fn strategy(&self, fresh: u64) -> Strategy {
        match self {
            Mode::Name(ModeName::Tree) => Strategy::default(),
            Mode::Name(ModeName::Random) => Strategy::Random { rng_seed: fresh },
            Mode::Strategy(s) => s.clone(),
        }
    }
}

struct Stored {
    meta: SessionMeta,
    session: Session,
}

impl Stored {
    fn view(&self) -> SessionView {
        let s = &self.session;
        SessionView {
            v: SCHEMA_VERSION,
            meta: self.meta.clone(),
            status: s.status(),
            sum: s.sum(),
            sum_stderr: s.sum_stderr(),
            next_setting: s.next_setting().ok(),
            detection_step: s.detection_step(),
            log: s.log().to_vec(),
        }
    }
}

/// A journal line that could not be replayed.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayWarning {
    pub path: PathBuf,
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReplayReport {
    pub sessions: usize,
    pub events: usize,
    pub warnings: Vec<ReplayWarning>,
}

#[derive(Default)]
pub struct Store {
    dir: Option<PathBuf>,
    sessions: RwLock<HashMap<Uuid, Arc<Mutex<Stored>>>>,
}

fn policy_for(meta: &SessionMeta) -> StoreResult<Arc<DecisionPolicy>> {
    Ok(Arc::new(DecisionPolicy::new(meta.n_qubits, Some(meta.threshold), meta.strategy.clone())?))
}

fn line_of(event: &Event) -> String {
    let mut s = serde_json::to_string(event).expect("events serialize");
    s.push('\n');
    s
}

impl Store {
    /// No journals; sessions vanish with the process.
    pub fn in_memory() -> Self {
        Store::default()
    }

    /// Creates `dir` if needed and replays every `*.jsonl` in it.
    pub fn open(dir: impl Into<PathBuf>) -> StoreResult<(Self, ReplayReport)> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let store = Store { dir: Some(dir.clone()), sessions: RwLock::default() };
        let mut report = ReplayReport::default();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            match replay_file(&path, &mut report)? {
                Some(stored) => {
                    report.sessions += 1;
                    store.sessions.write().unwrap().insert(stored.meta.id, Arc::new(Mutex::new(stored)));
                }
                None => continue,
            }
        }
        for w in &report.warnings {
            tracing::warn!(path = %w.path.display(), line = w.line, "journal replay stopped: {}", w.reason);
        }
        Ok((store, report))
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<Uuid> {
        let mut ids: Vec<Uuid> = self.sessions.read().unwrap().keys().copied().collect();
        ids.sort();
        ids
    }

    fn journal_path(&self, id: &Uuid) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    fn append(&self, id: &Uuid, event: &Event, create: bool) -> StoreResult<()> {
        if let Some(path) = self.journal_path(id) {
            let mut f = OpenOptions::new().append(true).create(create).open(path)?;
            f.write_all(line_of(event).as_bytes())?;
        }
        Ok(())
    }

    fn slot(&self, id: &str) -> StoreResult<Arc<Mutex<Stored>>> {
        let uuid = Uuid::parse_str(id).map_err(|_| StoreError::NotFound(id.to_string()))?;
        self.sessions.read().unwrap().get(&uuid).cloned().ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    pub fn create(&self, req: &NewSession) -> StoreResult<SessionView> {
        let id = Uuid::new_v4();
        let strategy = req.mode.as_ref().map(|m| m.strategy(id.as_u64_pair().1)).unwrap_or_default();
        let policy = Arc::new(DecisionPolicy::new(req.n_qubits, req.threshold, strategy.clone())?);
        let meta = SessionMeta {
            id,
            created_at: Utc::now(),
            n_qubits: req.n_qubits,
            threshold: policy.threshold(),
            strategy,
        };
        let stored = Stored { session: Session::new(policy), meta: meta.clone() };
        self.append(&meta.id, &Event::Created { v: SCHEMA_VERSION, meta: meta.clone() }, true)?;
        let view = stored.view();
        self.sessions.write().unwrap().insert(meta.id, Arc::new(Mutex::new(stored)));
        Ok(view)
    }

    pub fn get(&self, id: &str) -> StoreResult<SessionView> {
        Ok(self.slot(id)?.lock().unwrap().view())
    }

    /// Journal first, then commit, so a failed write leaves the session untouched.
    pub fn record(&self, id: &str, setting: &PauliString, value: f64, stderr: Option<f64>) -> StoreResult<RecordOutcome> {
        let slot = self.slot(id)?;
        let mut stored = slot.lock().unwrap();
        let mut next = stored.session.clone();
        let entry = next.record(setting, value, stderr)?.clone();
        self.append(&stored.meta.id, &Event::Recorded { v: SCHEMA_VERSION, entry }, false)?;
        stored.session = next;
        let s = &stored.session;
        Ok(RecordOutcome {
            v: SCHEMA_VERSION,
            status: s.status(),
            sum: s.sum(),
            sum_stderr: s.sum_stderr(),
            next_setting: s.next_setting().ok(),
        })
    }

    pub fn whatif(&self, id: &str, setting: &PauliString, value: f64) -> StoreResult<WhatIf> {
        Ok(self.slot(id)?.lock().unwrap().session.whatif(setting, value)?)
    }

    /// Rejects any attempt to change creation-time parameters.
    pub fn check_fixed(&self, id: &str, threshold: Option<f64>, mode: Option<&Mode>) -> StoreResult<()> {
        let slot = self.slot(id)?;
        let stored = slot.lock().unwrap();
        if threshold.is_some_and(|t| t != stored.meta.threshold) {
            return Err(StoreError::Conflict("threshold is fixed at session creation".into()));
        }
        let same = |m: &Mode| match (m, &stored.meta.strategy) {
            (Mode::Name(ModeName::Tree), Strategy::Tree { .. }) | (Mode::Name(ModeName::Random), Strategy::Random { .. }) => true,
            (Mode::Strategy(s), current) => s == current,
            _ => false,
        };
        if mode.is_some_and(|m| !same(m)) {
            return Err(StoreError::Conflict("strategy is fixed at session creation".into()));
        }
        Ok(())
    }
}

/// Replays one journal. Stops at the first bad line and truncates the file
/// there so later appends stay replayable.
fn replay_file(path: &Path, report: &mut ReplayReport) -> StoreResult<Option<Stored>> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut stored: Option<Stored> = None;
    let mut good_bytes = 0u64;
    let mut line_no = 0;
    let mut buf = String::new();
    let mut warn = |line: usize, reason: String| {
        report.warnings.push(ReplayWarning { path: path.to_path_buf(), line, reason });
    };
    loop {
        buf.clear();
        let read = reader.read_line(&mut buf)?;
        if read == 0 {
            break;
        }
        line_no += 1;
        if !buf.ends_with('\n') {
            warn(line_no, "truncated line".into());
            break;
        }
        let event: Event = match serde_json::from_str(buf.trim_end()) {
            Ok(e) => e,
            Err(e) => {
                warn(line_no, format!("unparseable: {e}"));
                break;
            }
        };
        let applied = match (&mut stored, event) {
            (None, Event::Created { meta, .. }) => policy_for(&meta).map(|p| {
                stored = Some(Stored { session: Session::new(p), meta });
            }),
            (Some(s), Event::Recorded { entry, .. }) => {
                let mut next = s.session.clone();
                match next.record(&entry.setting, entry.value, entry.stderr) {
                    Ok(e) if (e.sum - entry.sum).abs() <= 1e-9 && e.status == entry.status => {
                        s.session = next;
                        Ok(())
                    }
                    Ok(_) => Err(StoreError::Conflict("recorded sum/status disagree with replay".into())),
                    Err(e) => Err(e.into()),
                }
            }
            (None, _) => Err(StoreError::Conflict("journal does not start with a created event".into())),
            (Some(_), Event::Created { .. }) => Err(StoreError::Conflict("second created event".into())),
        };
        if let Err(e) = applied {
            warn(line_no, e.to_string());
            break;
        }
        report.events += 1;
        good_bytes += read as u64;
    }
    let file_len = fs::metadata(path)?.len();
    if good_bytes < file_len && stored.is_some() {
        OpenOptions::new().write(true).open(path)?.set_len(good_bytes)?;
    }
    Ok(stored)
}

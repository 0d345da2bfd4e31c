//! Interactive sessions.
//!
//! Each session is behind its own mutex so turns within a conversation are
//! serialized while separate conversations proceed in parallel. The index is
//! shared read-only through the [`Engine`].
//!
//! With a log path, every create, ask and delete is appended as one JSON line
//! and replayed on startup. Replay re-runs the asks, so the log must be read
//! with the same index and parameters to give the same answers.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{ad_hoc_turn, make_snippet, Engine, PipelineConfig};
use crate::classify::QuestionCategory;
use crate::error::{Error, Result};
use crate::rewrite::SessionContext;

/// Upper bound on `k` for one interactive request.
pub const MAX_INTERACTIVE_K: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskResult {
    pub doc_id: String,
    pub score: f64,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskResponse {
    pub resolved_query: String,
    pub category: QuestionCategory,
    pub weighted_terms: Vec<(String, f64)>,
    pub results: Vec<AskResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub utterance: String,
    #[serde(flatten)]
    pub response: AskResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub turns: Vec<TurnRecord>,
    pub topic_phrase: Option<String>,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
}

/// Per-request defaults for [`SessionStore::ask`].
#[derive(Debug, Clone, PartialEq)]
pub struct SessionDefaults {
    pub pipeline: PipelineConfig,
}

impl Default for SessionDefaults {
    fn default() -> Self {
        Self { pipeline: PipelineConfig::method().with_k(10) }
    }
}

struct Session {
    state: SessionState,
    context: SessionContext,
    deleted: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum LogEntry {
    Create { session_id: String, created_at: u64 },
    Ask { session_id: String, utterance: String, k: usize, lambda: f64 },
    Delete { session_id: String },
}

pub struct SessionStore {
    engine: Arc<Engine>,
    defaults: SessionDefaults,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    log: Option<(PathBuf, Mutex<File>)>,
}

impl SessionStore {
    pub fn new(engine: Arc<Engine>, defaults: SessionDefaults) -> Result<Self> {
        defaults.pipeline.validate()?;
        Ok(Self { engine, defaults, sessions: RwLock::new(HashMap::new()), log: None })
    }

    /// Opens or creates an append-only session log and replays it.
    pub fn with_log(engine: Arc<Engine>, defaults: SessionDefaults, path: &Path) -> Result<Self> {
        let mut store = Self::new(engine, defaults)?;
        let mut torn = false;
        if path.exists() {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path.display(), e))?;
            torn = bytes.last().is_some_and(|&b| b != b'\n');
            store.replay(BufReader::new(bytes.as_slice()), &path.display().to_string())?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path.display(), e))?;
        if torn {
            file.write_all(b"\n").map_err(|e| Error::io(path.display(), e))?;
        }
        store.log = Some((path.to_path_buf(), Mutex::new(file)));
        Ok(store)
    }

    fn replay<R: BufRead>(&self, reader: R, source: &str) -> Result<()> {
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let Ok(entry) = serde_json::from_str::<LogEntry>(&line) else {
                // A crash can leave a torn final line.
                log::warn!("{source}:{}: skipping unreadable session log line", n + 1);
                continue;
            };
            let outcome = match entry {
                LogEntry::Create { session_id, created_at } => {
                    self.insert(session_id, created_at);
                    Ok(())
                }
                LogEntry::Ask { session_id, utterance, k, lambda } => {
                    self.ask(&session_id, &utterance, Some(k), Some(lambda)).map(drop)
                }
                LogEntry::Delete { session_id } => self.delete_session(&session_id),
            };
            if let Err(e) = outcome {
                log::warn!("{source}:{}: replay failed: {e}", n + 1);
            }
        }
        Ok(())
    }

    fn append(&self, entry: &LogEntry) -> Result<()> {
        let Some((path, file)) = &self.log else { return Ok(()) };
        let mut line = serde_json::to_string(entry)?;
        line.push('\n');
        let mut file = file.lock().unwrap_or_else(|p| p.into_inner());
        file.write_all(line.as_bytes()).map_err(|e| Error::io(path.display(), e))
    }

    fn insert(&self, session_id: String, created_at: u64) {
        let session = Session {
            state: SessionState { session_id: session_id.clone(), turns: Vec::new(), topic_phrase: None, created_at },
            context: SessionContext::new(),
            deleted: false,
        };
        self.sessions.write().unwrap_or_else(|p| p.into_inner()).insert(session_id, Arc::new(Mutex::new(session)));
    }

    fn get(&self, session_id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(session_id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("unknown session {session_id}")))
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create_session(&self) -> Result<String> {
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        self.append(&LogEntry::Create { session_id: session_id.clone(), created_at })?;
        self.insert(session_id.clone(), created_at);
        Ok(session_id)
    }

    /// Runs one turn. `k` defaults to the store's interactive depth and
    /// `lambda` overrides the rerank weight for this turn only.
    pub fn ask(&self, session_id: &str, utterance: &str, k: Option<usize>, lambda: Option<f64>) -> Result<AskResponse> {
        let handle = self.get(session_id)?;
        if utterance.trim().is_empty() {
            return Err(Error::Validation("utterance must not be empty".into()));
        }
        let mut config = self.defaults.pipeline.clone();
        if let Some(k) = k {
            if k == 0 || k > MAX_INTERACTIVE_K {
                return Err(Error::Validation(format!("k must be between 1 and {MAX_INTERACTIVE_K}")));
            }
            config.retrieval.k = k;
        }
        if let Some(lambda) = lambda {
            config.rerank.lambda = lambda;
            config.rerank.validate().map_err(|e| Error::Validation(e.to_string()))?;
        }

        let mut session = handle.lock().unwrap_or_else(|p| p.into_inner());
        if session.deleted {
            return Err(Error::NotFound(format!("unknown session {session_id}")));
        }
        let outcome = self.engine.process_turn(&session.context, utterance, None, &config)?;
        let index = self.engine.index();
        let results = outcome
            .results
            .iter()
            .map(|d| {
                let text = index.ordinal_of(&d.doc_id).map_or("", |o| index.doc_text(o));
                AskResult {
                    doc_id: d.doc_id.clone(),
                    score: d.score,
                    snippet: make_snippet(text, outcome.category, self.engine.lexicon()),
                }
            })
            .collect();
        let response = AskResponse {
            resolved_query: outcome.resolved.clone(),
            category: outcome.category,
            weighted_terms: outcome.query.terms().to_vec(),
            results,
        };
        self.append(&LogEntry::Ask {
            session_id: session_id.to_string(),
            utterance: utterance.to_string(),
            k: config.retrieval.k,
            lambda: config.rerank.lambda,
        })?;
        let number = session.context.turn_count() + 1;
        session.context.push(ad_hoc_turn(session_id, number, utterance), outcome.resolved);
        session.state.topic_phrase = session.context.topic_phrase().map(String::from);
        session.state.turns.push(TurnRecord { utterance: utterance.to_string(), response: response.clone() });
        Ok(response)
    }

    pub fn get_history(&self, session_id: &str) -> Result<SessionState> {
        let handle = self.get(session_id)?;
        let session = handle.lock().unwrap_or_else(|p| p.into_inner());
        if session.deleted {
            return Err(Error::NotFound(format!("unknown session {session_id}")));
        }
        Ok(session.state.clone())
    }

    pub fn delete_session(&self, session_id: &str) -> Result<()> {
        let handle = self.get(session_id)?;
        let mut session = handle.lock().unwrap_or_else(|p| p.into_inner());
        if session.deleted {
            return Err(Error::NotFound(format!("unknown session {session_id}")));
        }
        self.append(&LogEntry::Delete { session_id: session_id.to_string() })?;
        session.deleted = true;
        self.sessions.write().unwrap_or_else(|p| p.into_inner()).remove(session_id);
        Ok(())
    }
}

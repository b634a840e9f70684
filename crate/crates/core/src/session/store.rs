use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Observation, ObservationLog};
use crate::taxonomy::{Taxonomy, INVALID_LABEL};

use super::plan::{Condition, SessionPlan, Trial};
use super::score::{score_block, BlockScore, TrialResult, NO_RESPONSE};

const INDEX_FILE: &str = "index.jsonl";
const SESSION_DIR: &str = "sessions";

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum JournalRecord {
    Plan { session_id: String, plan: Box<SessionPlan> },
    Trial { result: TrialResult },
    Close,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexRecord {
    session_id: String,
    participant_id: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RecordOutcome {
    Recorded,
    /// The trial was already recorded; the first submission stands.
    Duplicate(TrialResult),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SessionStatus {
    pub session_id: String,
    pub participant_id: String,
    pub resolved: usize,
    pub total: usize,
    pub closed: bool,
}

impl SessionStatus {
    pub fn complete(&self) -> bool {
        self.resolved == self.total
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExportedLog {
    pub log: ObservationLog,
    /// False when some main trials are still unresolved; the log is partial.
    pub complete: bool,
    pub missing: usize,
}

struct SessionState {
    id: String,
    plan: SessionPlan,
    results: HashMap<(usize, usize), TrialResult>,
    closed: bool,
    journal: File,
}

impl SessionState {
    fn append(&mut self, rec: &JournalRecord) -> Result<()> {
        append_line(&mut self.journal, rec).map_err(|e| Error::io(&self.id, e))
    }

    fn status(&self) -> SessionStatus {
        SessionStatus {
            session_id: self.id.clone(),
            participant_id: self.plan.participant_id.clone(),
            resolved: self.results.len(),
            total: self.plan.trial_count(),
            closed: self.closed,
        }
    }
}

fn append_line(file: &mut File, rec: &impl Serialize) -> std::io::Result<()> {
    let mut line = serde_json::to_vec(rec).map_err(std::io::Error::other)?;
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()
}

/// Durable store for running sessions.
///
/// Every session has an append-only journal (`sessions/<id>.jsonl`): the
/// plan, then one line per recorded trial, then a close marker. A trial is
/// acknowledged only after its line is synced, and [`SessionStore::open`]
/// replays the journals, so acknowledged trials survive a crash. Calls on
/// one session are serialized; different sessions proceed in parallel.
pub struct SessionStore {
    root: PathBuf,
    tax: Taxonomy,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionState>>>>,
    index: Mutex<File>,
}

impl SessionStore {
    pub fn open(root: impl AsRef<Path>, tax: Taxonomy) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let dir = root.join(SESSION_DIR);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let index_path = root.join(INDEX_FILE);
        let index = OpenOptions::new()
            .create(true)
            .append(true)
            .read(true)
            .open(&index_path)
            .map_err(|e| Error::io(&index_path, e))?;
        let mut sessions = HashMap::new();
        for line in BufReader::new(File::open(&index_path).map_err(|e| Error::io(&index_path, e))?).lines() {
            let line = line.map_err(|e| Error::io(&index_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let Ok(rec) = serde_json::from_str::<IndexRecord>(&line) else {
                log::warn!("skipping unreadable index line in {}", index_path.display());
                continue;
            };
            let state = replay(&dir.join(format!("{}.jsonl", rec.session_id)), &rec.session_id)?;
            sessions.insert(rec.session_id, Arc::new(Mutex::new(state)));
        }
        Ok(SessionStore {
            root,
            tax,
            sessions: RwLock::new(sessions),
            index: Mutex::new(index),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.tax
    }

    pub fn create(&self, plan: SessionPlan) -> Result<String> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let path = self.root.join(SESSION_DIR).join(format!("{id}.jsonl"));
        let journal = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let participant_id = plan.participant_id.clone();
        let mut state = SessionState {
            id: id.clone(),
            plan,
            results: HashMap::new(),
            closed: false,
            journal,
        };
        let rec = JournalRecord::Plan {
            session_id: id.clone(),
            plan: Box::new(state.plan.clone()),
        };
        state.append(&rec)?;
        append_line(
            &mut self.index.lock(),
            &IndexRecord {
                session_id: id.clone(),
                participant_id,
            },
        )
        .map_err(|e| Error::io(self.root.join(INDEX_FILE), e))?;
        self.sessions.write().insert(id.clone(), Arc::new(Mutex::new(state)));
        Ok(id)
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<SessionState>>> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.to_string()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn plan(&self, id: &str) -> Result<SessionPlan> {
        Ok(self.session(id)?.lock().plan.clone())
    }

    pub fn status(&self, id: &str) -> Result<SessionStatus> {
        Ok(self.session(id)?.lock().status())
    }

    /// First unresolved trial in presentation order, or `None` when done.
    pub fn next_trial(&self, id: &str) -> Result<Option<(usize, usize, Trial)>> {
        let s = self.session(id)?;
        let s = s.lock();
        if s.closed {
            return Err(Error::SessionClosed(id.to_string()));
        }
        Ok(s.plan.blocks.iter().find_map(|b| {
            b.trials
                .iter()
                .enumerate()
                .find(|(i, _)| !s.results.contains_key(&(b.index, *i)))
                .map(|(i, t)| (b.index, i, t.clone()))
        }))
    }

    /// Validates and durably appends one trial result. The session closes
    /// itself once every trial is resolved.
    pub fn record(&self, id: &str, mut result: TrialResult) -> Result<RecordOutcome> {
        let s = self.session(id)?;
        let mut s = s.lock();
        if let Some(prior) = s.results.get(&(result.block, result.trial)) {
            return Ok(RecordOutcome::Duplicate(prior.clone()));
        }
        if s.closed {
            return Err(Error::SessionClosed(id.to_string()));
        }
        let trial = s
            .plan
            .trial(result.block, result.trial)
            .ok_or_else(|| Error::Session(format!("no trial {}/{} in session {id}", result.block, result.trial)))?;
        if result.participant_id != s.plan.participant_id {
            return Err(Error::Session(format!("participant {:?} does not own session {id}", result.participant_id)));
        }
        if result.stimulus_id != trial.stimulus_id {
            return Err(Error::Session(format!(
                "trial {}/{} showed {:?}, not {:?}",
                result.block, result.trial, trial.stimulus_id, result.stimulus_id
            )));
        }
        if result.response == NO_RESPONSE {
            result.response_time_ms = None;
        } else {
            result.response = self
                .tax
                .normalize(&result.response)
                .ok_or_else(|| Error::Session(format!("response {:?} is not a superclass", result.response)))?
                .to_string();
            match result.response_time_ms {
                Some(rt) if rt > s.plan.timing.response_ms => {
                    return Err(Error::Session(format!(
                        "response time {rt} ms exceeds the {} ms window",
                        s.plan.timing.response_ms
                    )))
                }
                _ => {}
            }
        }
        s.append(&JournalRecord::Trial { result: result.clone() })?;
        s.results.insert((result.block, result.trial), result);
        if s.results.len() == s.plan.trial_count() {
            s.append(&JournalRecord::Close)?;
            s.closed = true;
        }
        Ok(RecordOutcome::Recorded)
    }

    pub fn close(&self, id: &str) -> Result<()> {
        let s = self.session(id)?;
        let mut s = s.lock();
        if !s.closed {
            s.append(&JournalRecord::Close)?;
            s.closed = true;
        }
        Ok(())
    }

    pub fn results(&self, id: &str) -> Result<Vec<TrialResult>> {
        let s = self.session(id)?;
        let s = s.lock();
        let mut out: Vec<TrialResult> = s.results.values().cloned().collect();
        out.sort_by_key(|r| (r.block, r.trial));
        Ok(out)
    }

    pub fn score(&self, id: &str, block: usize) -> Result<BlockScore> {
        let s = self.session(id)?;
        let s = s.lock();
        let b = s
            .plan
            .blocks
            .get(block)
            .ok_or_else(|| Error::Session(format!("no block {block} in session {id}")))?;
        let results: Vec<TrialResult> = s.results.values().filter(|r| r.block == block).cloned().collect();
        score_block(b, &results, &s.plan.bonus)
    }

    /// Main-block trials as an observation log; "none" becomes "invalid".
    pub fn export(&self, id: &str) -> Result<ExportedLog> {
        let s = self.session(id)?;
        let s = s.lock();
        let mut log = ObservationLog::new(s.plan.participant_id.clone());
        let mut missing = 0;
        for (block, trial, t) in s.plan.main_trials() {
            let Condition::Corrupted { corruption, severity } = t.condition else {
                continue;
            };
            let Some(r) = s.results.get(&(block, trial)) else {
                missing += 1;
                continue;
            };
            let response = if r.response == NO_RESPONSE { INVALID_LABEL.to_string() } else { r.response.clone() };
            log.records.push(Observation {
                image_id: t.image_id.clone(),
                superclass_true: t.superclass.clone(),
                superclass_response: response,
                corruption,
                severity,
                response_time_ms: r.response_time_ms,
            });
        }
        Ok(ExportedLog {
            log,
            complete: missing == 0,
            missing,
        })
    }

    pub fn export_all(&self) -> Result<Vec<ExportedLog>> {
        self.session_ids().iter().map(|id| self.export(id)).collect()
    }
}

fn replay(path: &Path, id: &str) -> Result<SessionState> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut plan = None;
    let mut results = HashMap::new();
    let mut closed = false;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        // A torn final line from a crash mid-write was never acknowledged.
        let Ok(rec) = serde_json::from_str::<JournalRecord>(&line) else {
            log::warn!("{}: ignoring unreadable journal line", path.display());
            continue;
        };
        match rec {
            JournalRecord::Plan { plan: p, .. } => plan = Some(*p),
            JournalRecord::Trial { result } => {
                results.entry((result.block, result.trial)).or_insert(result);
            }
            JournalRecord::Close => closed = true,
        }
    }
    let plan = plan.ok_or_else(|| Error::Format(format!("{}: journal has no plan", path.display())))?;
    let journal = OpenOptions::new().append(true).open(path).map_err(|e| Error::io(path, e))?;
    Ok(SessionState {
        id: id.to_string(),
        plan,
        results,
        closed,
        journal,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::session::plan::tests_support::small_catalog;
    use crate::session::{plan_session, PlanConfig};

    fn setup() -> (tempfile::TempDir, SessionStore, String) {
        let tax = Taxonomy::builtin();
        let cat = small_catalog(&tax);
        let plan = plan_session("alice", 0, &cat, &PlanConfig::default(), 5, &HashSet::new()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path(), tax).unwrap();
        let id = store.create(plan).unwrap();
        (dir, store, id)
    }

    fn answer(store: &SessionStore, id: &str, correct: bool) -> TrialResult {
        let (block, trial, t) = store.next_trial(id).unwrap().unwrap();
        TrialResult {
            participant_id: "alice".into(),
            block,
            trial,
            stimulus_id: t.stimulus_id,
            response: if correct { t.superclass } else { NO_RESPONSE.into() },
            response_time_ms: Some(640),
            presented_at: Some(1),
        }
    }

    #[test]
    fn record_is_idempotent_and_durable() {
        let (dir, store, id) = setup();
        let first = answer(&store, &id, true);
        assert_eq!(store.record(&id, first.clone()).unwrap(), RecordOutcome::Recorded);
        let mut second = first.clone();
        second.response = NO_RESPONSE.into();
        assert_eq!(store.record(&id, second).unwrap(), RecordOutcome::Duplicate(first.clone()));
        let r = answer(&store, &id, false);
        store.record(&id, r).unwrap();
        drop(store);

        let reopened = SessionStore::open(dir.path(), Taxonomy::builtin()).unwrap();
        let results = reopened.results(&id).unwrap();
        assert_eq!(results.len(), 2);
        assert_eq!(results[0], first);
        assert_eq!(results[1].response_time_ms, None, "no-response trials carry no latency");
    }

    #[test]
    fn rejects_invalid_submissions() {
        let (_dir, store, id) = setup();
        let good = answer(&store, &id, true);
        let mut r = good.clone();
        r.stimulus_id = "other.png".into();
        assert!(store.record(&id, r).is_err());
        let mut r = good.clone();
        r.response = "banana".into();
        assert!(store.record(&id, r).is_err());
        let mut r = good.clone();
        r.response_time_ms = Some(2001);
        assert!(store.record(&id, r).is_err());
        let mut r = good.clone();
        r.trial = 999;
        assert!(store.record(&id, r).is_err());
        assert!(matches!(store.record("nope", good.clone()), Err(Error::UnknownSession(_))));

        store.close(&id).unwrap();
        assert!(matches!(store.record(&id, good), Err(Error::SessionClosed(_))));
    }

    #[test]
    fn full_session_export() {
        let (_dir, store, id) = setup();
        let mut n = 0;
        while store.status(&id).unwrap().resolved < 690 {
            let r = answer(&store, &id, n % 3 != 0);
            store.record(&id, r).unwrap();
            n += 1;
        }
        assert!(store.status(&id).unwrap().closed);
        let ex = store.export(&id).unwrap();
        assert!(ex.complete);
        assert_eq!(ex.log.records.len(), 600);
        assert!(ex.log.records.iter().any(|o| o.superclass_response == INVALID_LABEL));
        let session_correct: usize = (2..12).map(|b| store.score(&id, b).unwrap().correct).sum();
        assert_eq!(ex.log.records.iter().filter(|o| o.is_correct()).count(), session_correct);
    }
}

use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Mutex;

use super::job::{JobState, ProcessingJob, StageTimings};
use crate::corpus::{DecisionItem, Meeting, MeetingStatus, ModelVersions, Utterance};
use crate::error::{Error, Result};

const SCHEMA_VERSION: i64 = 1;

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS meetings (
    id TEXT PRIMARY KEY,
    title TEXT NOT NULL,
    recorded_at TEXT,
    status TEXT NOT NULL,
    utterances TEXT NOT NULL,
    idempotency_key TEXT UNIQUE,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS decision_items (
    id TEXT PRIMARY KEY,
    meeting_id TEXT NOT NULL REFERENCES meetings(id),
    utterance_id TEXT NOT NULL,
    utterance_index INTEGER NOT NULL,
    original_text TEXT NOT NULL,
    rewritten_text TEXT NOT NULL,
    degraded INTEGER NOT NULL,
    context_tokens INTEGER NOT NULL,
    created_at TEXT NOT NULL,
    detector_version TEXT NOT NULL,
    rewriter_version TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS decision_items_meeting ON decision_items(meeting_id, utterance_index);
CREATE TABLE IF NOT EXISTS jobs (
    meeting_id TEXT PRIMARY KEY REFERENCES meetings(id),
    id TEXT NOT NULL,
    state TEXT NOT NULL,
    error TEXT,
    timings TEXT NOT NULL,
    created_at TEXT NOT NULL,
    updated_at TEXT NOT NULL
);
";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeetingSummary {
    pub id: String,
    pub title: String,
    pub recorded_at: Option<DateTime<Utc>>,
    pub status: MeetingStatus,
    pub utterance_count: usize,
    pub decision_count: usize,
    pub created_at: DateTime<Utc>,
}

/// Outcome of an upload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inserted {
    Created(String),
    /// Same idempotency key seen before; the stored id and status.
    Replayed((String, MeetingStatus)),
}

/// SQLite-backed storage. One connection behind a mutex; every write is a
/// single transaction.
pub struct Store {
    conn: Mutex<Connection>,
}

fn parse_time(s: &str) -> rusqlite::Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e)))
}

impl Store {
    pub fn open(path: &Path) -> Result<Self> {
        Store::init(Connection::open(path)?)
    }

    pub fn in_memory() -> Result<Self> {
        Store::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self> {
        let version: i64 = conn.query_row("PRAGMA user_version", [], |r| r.get(0))?;
        if version > SCHEMA_VERSION {
            return Err(Error::Setup(format!(
                "database schema version {version} is newer than supported {SCHEMA_VERSION}"
            )));
        }
        conn.execute_batch(SCHEMA)?;
        conn.execute_batch(&format!("PRAGMA user_version = {SCHEMA_VERSION}; PRAGMA foreign_keys = ON;"))?;
        Ok(Store { conn: Mutex::new(conn) })
    }

    fn conn(&self) -> std::sync::MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Stores a parsed meeting. A repeated idempotency key returns the
    /// original id, unless the transcript differs, which is a conflict.
    pub fn insert_meeting(&self, meeting: &Meeting, idempotency_key: Option<&str>) -> Result<Inserted> {
        let utterances = serde_json::to_string(&meeting.utterances)?;
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        if let Some(key) = idempotency_key {
            let prior: Option<(String, String, String)> = tx
                .query_row(
                    "SELECT id, utterances, status FROM meetings WHERE idempotency_key = ?1",
                    [key],
                    |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)),
                )
                .optional()?;
            if let Some((id, stored, status)) = prior {
                if stored != utterances {
                    return Err(Error::Conflict(format!(
                        "idempotency key {key:?} was used for a different transcript"
                    )));
                }
                let status = MeetingStatus::parse(&status)
                    .ok_or_else(|| Error::Validation(format!("unknown meeting status {status:?}")))?;
                return Ok(Inserted::Replayed((id, status)));
            }
        }
        let exists: bool = tx.query_row("SELECT EXISTS(SELECT 1 FROM meetings WHERE id = ?1)", [&meeting.id], |r| {
            r.get(0)
        })?;
        if exists {
            return Err(Error::Conflict(format!("meeting {} already exists", meeting.id)));
        }
        tx.execute(
            "INSERT INTO meetings (id, title, recorded_at, status, utterances, idempotency_key, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
            params![
                meeting.id,
                meeting.title,
                meeting.recorded_at.map(|t| t.to_rfc3339()),
                MeetingStatus::Uploaded.as_str(),
                utterances,
                idempotency_key,
                Utc::now().to_rfc3339(),
            ],
        )?;
        tx.commit()?;
        Ok(Inserted::Created(meeting.id.clone()))
    }

    pub fn list_meetings(&self) -> Result<Vec<MeetingSummary>> {
        let conn = self.conn();
        let mut stmt = conn.prepare(
            "SELECT m.id, m.title, m.recorded_at, m.status, m.utterances, m.created_at,
                    (SELECT COUNT(*) FROM decision_items d WHERE d.meeting_id = m.id)
             FROM meetings m ORDER BY m.created_at, m.id",
        )?;
        let rows = stmt.query_map([], |r| {
            let recorded: Option<String> = r.get(2)?;
            let status: String = r.get(3)?;
            let utterances: String = r.get(4)?;
            let created: String = r.get(5)?;
            let count: i64 = r.get(6)?;
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, String>(1)?,
                recorded,
                status,
                utterances,
                created,
                count,
            ))
        })?;
        let mut out = Vec::new();
        for row in rows {
            let (id, title, recorded, status, utterances, created, count) = row?;
            let utterances: Vec<Utterance> = serde_json::from_str(&utterances)?;
            out.push(MeetingSummary {
                id,
                title,
                recorded_at: recorded.as_deref().map(parse_time).transpose()?,
                status: MeetingStatus::parse(&status)
                    .ok_or_else(|| Error::Validation(format!("unknown meeting status {status:?}")))?,
                utterance_count: utterances.len(),
                decision_count: count as usize,
                created_at: parse_time(&created)?,
            });
        }
        Ok(out)
    }

    pub fn get_meeting(&self, id: &str) -> Result<Meeting> {
        let conn = self.conn();
        let row: Option<(String, Option<String>, String, String)> = conn
            .query_row(
                "SELECT title, recorded_at, status, utterances FROM meetings WHERE id = ?1",
                [id],
                |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?)),
            )
            .optional()?;
        let (title, recorded, status, utterances) = row.ok_or_else(|| Error::NotFound(format!("meeting {id}")))?;
        Ok(Meeting {
            id: id.to_owned(),
            title,
            recorded_at: recorded.as_deref().map(parse_time).transpose()?,
            utterances: serde_json::from_str(&utterances)?,
            status: MeetingStatus::parse(&status)
                .ok_or_else(|| Error::Validation(format!("unknown meeting status {status:?}")))?,
        })
    }

    pub fn set_status(&self, id: &str, status: MeetingStatus) -> Result<()> {
        let n = self
            .conn()
            .execute("UPDATE meetings SET status = ?2 WHERE id = ?1", params![id, status.as_str()])?;
        if n == 0 {
            return Err(Error::NotFound(format!("meeting {id}")));
        }
        Ok(())
    }

    /// Swaps in a complete run's items and marks the meeting processed, in
    /// one transaction.
    pub fn replace_decisions(&self, meeting_id: &str, items: &[DecisionItem]) -> Result<()> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        tx.execute("DELETE FROM decision_items WHERE meeting_id = ?1", [meeting_id])?;
        {
            let mut stmt = tx.prepare(
                "INSERT INTO decision_items (id, meeting_id, utterance_id, utterance_index, original_text,
                 rewritten_text, degraded, context_tokens, created_at, detector_version, rewriter_version)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11)",
            )?;
            for it in items {
                if it.meeting_id != meeting_id {
                    return Err(Error::contract(format!("item {} belongs to meeting {}", it.id, it.meeting_id)));
                }
                stmt.execute(params![
                    it.id,
                    it.meeting_id,
                    it.utterance_id,
                    it.utterance_index as i64,
                    it.original_text,
                    it.rewritten_text,
                    it.degraded,
                    it.context_tokens as i64,
                    it.created_at.to_rfc3339(),
                    it.model_versions.detector,
                    it.model_versions.rewriter,
                ])?;
            }
        }
        let n = tx.execute(
            "UPDATE meetings SET status = ?2 WHERE id = ?1",
            params![meeting_id, MeetingStatus::Processed.as_str()],
        )?;
        if n == 0 {
            return Err(Error::NotFound(format!("meeting {meeting_id}")));
        }
        tx.commit()?;
        Ok(())
    }

    pub fn get_decisions(&self, meeting_id: &str) -> Result<Vec<DecisionItem>> {
        let conn = self.conn();
        let exists: bool =
            conn.query_row("SELECT EXISTS(SELECT 1 FROM meetings WHERE id = ?1)", [meeting_id], |r| r.get(0))?;
        if !exists {
            return Err(Error::NotFound(format!("meeting {meeting_id}")));
        }
        let mut stmt = conn.prepare(
            "SELECT id, meeting_id, utterance_id, utterance_index, original_text, rewritten_text, degraded,
                    context_tokens, created_at, detector_version, rewriter_version
             FROM decision_items WHERE meeting_id = ?1 ORDER BY utterance_index",
        )?;
        let rows = stmt.query_map([meeting_id], |r| {
            Ok(DecisionItem {
                id: r.get(0)?,
                meeting_id: r.get(1)?,
                utterance_id: r.get(2)?,
                utterance_index: r.get::<_, i64>(3)? as usize,
                original_text: r.get(4)?,
                rewritten_text: r.get(5)?,
                degraded: r.get(6)?,
                context_tokens: r.get::<_, i64>(7)? as usize,
                created_at: parse_time(&r.get::<_, String>(8)?)?,
                model_versions: ModelVersions {
                    detector: r.get(9)?,
                    rewriter: r.get(10)?,
                },
            })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn put_job(&self, job: &ProcessingJob) -> Result<()> {
        self.conn().execute(
            "INSERT INTO jobs (meeting_id, id, state, error, timings, created_at, updated_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)
             ON CONFLICT(meeting_id) DO UPDATE SET id = ?2, state = ?3, error = ?4, timings = ?5,
                created_at = ?6, updated_at = ?7",
            params![
                job.meeting_id,
                job.id,
                job.state.as_str(),
                job.error,
                serde_json::to_string(&job.timings)?,
                job.created_at.to_rfc3339(),
                job.updated_at.to_rfc3339(),
            ],
        )?;
        Ok(())
    }

    /// Latest job for a meeting.
    pub fn get_job(&self, meeting_id: &str) -> Result<ProcessingJob> {
        let conn = self.conn();
        let row: Option<(String, String, Option<String>, String, String, String)> = conn
            .query_row(
                "SELECT id, state, error, timings, created_at, updated_at FROM jobs WHERE meeting_id = ?1",
                [meeting_id],
                |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?, r.get(5)?)),
            )
            .optional()?;
        let (id, state, error, timings, created, updated) =
            row.ok_or_else(|| Error::NotFound(format!("job for meeting {meeting_id}")))?;
        let timings: StageTimings = serde_json::from_str(&timings)?;
        Ok(ProcessingJob {
            id,
            meeting_id: meeting_id.to_owned(),
            state: JobState::parse(&state).ok_or_else(|| Error::Validation(format!("unknown job state {state:?}")))?,
            error,
            timings,
            created_at: parse_time(&created)?,
            updated_at: parse_time(&updated)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meeting(id: &str, n: usize) -> Meeting {
        Meeting {
            id: id.into(),
            title: format!("{id} title"),
            recorded_at: None,
            utterances: (0..n)
                .map(|i| Utterance {
                    id: format!("u_{i}"),
                    index: i,
                    speaker: "A".into(),
                    text: format!("t{i}"),
                    start_time: None,
                    end_time: None,
                })
                .collect(),
            status: MeetingStatus::Uploaded,
        }
    }

    fn item(meeting: &str, idx: usize, text: &str) -> DecisionItem {
        DecisionItem {
            id: format!("{meeting}:u_{idx}"),
            meeting_id: meeting.into(),
            utterance_id: format!("u_{idx}"),
            utterance_index: idx,
            original_text: format!("t{idx}"),
            rewritten_text: text.into(),
            degraded: false,
            context_tokens: 3,
            created_at: Utc::now(),
            model_versions: ModelVersions::default(),
        }
    }

    #[test]
    fn meeting_round_trip() {
        let s = Store::in_memory().unwrap();
        let m = meeting("a", 3);
        assert_eq!(s.insert_meeting(&m, None).unwrap(), Inserted::Created("a".into()));
        assert_eq!(s.get_meeting("a").unwrap(), m);
        assert_eq!(s.list_meetings().unwrap()[0].utterance_count, 3);
        assert!(matches!(s.get_meeting("zz"), Err(Error::NotFound(_))));
    }

    #[test]
    fn idempotency_key_replays() {
        let s = Store::in_memory().unwrap();
        s.insert_meeting(&meeting("a", 2), Some("k")).unwrap();
        assert_eq!(s.insert_meeting(&meeting("a", 2), Some("k")).unwrap(), Inserted::Replayed(("a".into(), MeetingStatus::Uploaded)));
        assert!(matches!(s.insert_meeting(&meeting("b", 3), Some("k")), Err(Error::Conflict(_))));
        assert!(matches!(s.insert_meeting(&meeting("a", 2), None), Err(Error::Conflict(_))));
        assert_eq!(s.list_meetings().unwrap().len(), 1);
    }

    #[test]
    fn decisions_replace_and_sort() {
        let s = Store::in_memory().unwrap();
        s.insert_meeting(&meeting("a", 6), None).unwrap();
        s.replace_decisions("a", &[item("a", 4, "x"), item("a", 1, "y")]).unwrap();
        let got: Vec<usize> = s.get_decisions("a").unwrap().iter().map(|i| i.utterance_index).collect();
        assert_eq!(got, vec![1, 4]);
        s.replace_decisions("a", &[item("a", 2, "z")]).unwrap();
        let got = s.get_decisions("a").unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].rewritten_text, "z");
        assert_eq!(s.get_meeting("a").unwrap().status, MeetingStatus::Processed);
    }

    #[test]
    fn failed_replacement_keeps_previous_run() {
        let s = Store::in_memory().unwrap();
        s.insert_meeting(&meeting("a", 6), None).unwrap();
        s.replace_decisions("a", &[item("a", 1, "y")]).unwrap();
        let bad = [item("a", 2, "z"), item("other", 3, "w")];
        assert!(s.replace_decisions("a", &bad).is_err());
        assert_eq!(s.get_decisions("a").unwrap()[0].rewritten_text, "y");
    }

    #[test]
    fn job_upsert() {
        let s = Store::in_memory().unwrap();
        s.insert_meeting(&meeting("a", 1), None).unwrap();
        let mut j = ProcessingJob::new("a");
        s.put_job(&j).unwrap();
        j.advance(JobState::Detecting).unwrap();
        s.put_job(&j).unwrap();
        assert_eq!(s.get_job("a").unwrap().state, JobState::Detecting);
        assert!(s.get_job("b").is_err());
    }
}

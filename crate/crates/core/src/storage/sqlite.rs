use std::collections::BTreeMap;
use std::path::Path;

use parking_lot::Mutex;
use rusqlite::{params, Connection, OptionalExtension, Row, Transaction, TransactionBehavior};

use super::{check_drafts, FaultInjector, MessageDraft, QuizRecord, Store, StoreError, StoreResult};
use crate::domain::{random_hex_id, ChatMessage, CompletionRecord, ModuleId, Timestamp, UserProfile};

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS users (
    user_id       TEXT PRIMARY KEY,
    name          TEXT NOT NULL,
    email         TEXT NOT NULL UNIQUE COLLATE NOCASE,
    year_of_study TEXT NOT NULL,
    gender        TEXT NOT NULL,
    major         TEXT NOT NULL,
    instructor    TEXT NOT NULL,
    course        TEXT NOT NULL,
    created_at    TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS chat_history (
    message_id TEXT PRIMARY KEY,
    user_id    TEXT NOT NULL REFERENCES users(user_id),
    sender     TEXT NOT NULL CHECK (sender IN ('user', 'empa')),
    content    TEXT NOT NULL,
    timestamp  TEXT NOT NULL,
    seq        INTEGER NOT NULL,
    module_id  TEXT,
    UNIQUE (user_id, seq)
);
CREATE TABLE IF NOT EXISTS module_progress (
    user_id      TEXT NOT NULL REFERENCES users(user_id),
    module_id    TEXT NOT NULL,
    completed    INTEGER NOT NULL,
    completed_at TEXT,
    PRIMARY KEY (user_id, module_id)
);
CREATE TABLE IF NOT EXISTS quiz_attempts (
    user_id       TEXT NOT NULL REFERENCES users(user_id),
    module_id     TEXT NOT NULL,
    score         REAL NOT NULL,
    attempt_count INTEGER NOT NULL,
    updated_at    TEXT NOT NULL,
    PRIMARY KEY (user_id, module_id)
);
CREATE TABLE IF NOT EXISTS module_views (
    user_id   TEXT NOT NULL REFERENCES users(user_id),
    module_id TEXT NOT NULL,
    viewed_at TEXT NOT NULL,
    PRIMARY KEY (user_id, module_id)
);
";

/// Relational store backed by a SQLite database file.
///
/// Each call runs in its own transaction with `synchronous = FULL`, so a
/// successful return means the write reached disk.
pub struct SqliteStore {
    conn: Mutex<Connection>,
    faults: FaultInjector,
}

impl std::fmt::Debug for SqliteStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SqliteStore").finish_non_exhaustive()
    }
}

impl SqliteStore {
    pub fn open(path: impl AsRef<Path>) -> StoreResult<Self> {
        Self::init(Connection::open(path)?)
    }

    pub fn open_in_memory() -> StoreResult<Self> {
        Self::init(Connection::open_in_memory()?)
    }

    pub fn with_fault_injector(mut self, faults: FaultInjector) -> Self {
        self.faults = faults;
        self
    }

    fn init(conn: Connection) -> StoreResult<Self> {
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "FULL")?;
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self {
            conn: Mutex::new(conn),
            faults: FaultInjector::default(),
        })
    }

    fn write<T>(&self, f: impl FnOnce(&Transaction<'_>) -> StoreResult<T>) -> StoreResult<T> {
        let mut conn = self.conn.lock();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let out = f(&tx)?;
        tx.commit()?;
        Ok(out)
    }
}

fn parse_ts(raw: String) -> rusqlite::Result<Timestamp> {
    raw.parse().map_err(|e: chrono::ParseError| {
        rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e))
    })
}

fn parse_module(raw: String) -> rusqlite::Result<ModuleId> {
    raw.parse().map_err(|e: String| {
        rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, e.into())
    })
}

fn profile_from_row(row: &Row<'_>) -> rusqlite::Result<UserProfile> {
    Ok(UserProfile {
        user_id: row.get(0)?,
        name: row.get(1)?,
        email: row.get(2)?,
        year_of_study: row.get(3)?,
        gender: row.get(4)?,
        major: row.get(5)?,
        instructor: row.get(6)?,
        course: row.get(7)?,
        created_at: parse_ts(row.get(8)?)?,
    })
}

fn message_from_row(row: &Row<'_>) -> rusqlite::Result<ChatMessage> {
    let sender: String = row.get(2)?;
    Ok(ChatMessage {
        message_id: row.get(0)?,
        user_id: row.get(1)?,
        sender: sender.parse().map_err(|e: String| {
            rusqlite::Error::FromSqlConversionFailure(2, rusqlite::types::Type::Text, e.into())
        })?,
        content: row.get(3)?,
        timestamp: parse_ts(row.get(4)?)?,
        seq: row.get::<_, i64>(5)? as u64,
        module_id: row.get::<_, Option<String>>(6)?.map(parse_module).transpose()?,
    })
}

fn require_user(conn: &Connection, user_id: &str) -> StoreResult<()> {
    let exists = conn
        .query_row("SELECT 1 FROM users WHERE user_id = ?1", [user_id], |_| Ok(()))
        .optional()?;
    exists.ok_or_else(|| StoreError::NotFound(user_id.to_owned()))
}

fn insert_message(tx: &Transaction<'_>, msg: &ChatMessage) -> StoreResult<()> {
    tx.execute(
        "INSERT INTO chat_history (message_id, user_id, sender, content, timestamp, seq, module_id)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
        params![
            msg.message_id,
            msg.user_id,
            msg.sender.as_str(),
            msg.content,
            msg.timestamp.to_string(),
            msg.seq as i64,
            msg.module_id.map(|m| m.as_str()),
        ],
    )?;
    Ok(())
}

fn new_message(user_id: &str, draft: MessageDraft, seq: u64, timestamp: Timestamp) -> StoreResult<ChatMessage> {
    Ok(ChatMessage {
        message_id: random_hex_id().map_err(|e| StoreError::Storage(e.to_string()))?,
        user_id: user_id.to_owned(),
        sender: draft.sender,
        content: draft.content,
        timestamp,
        seq,
        module_id: draft.module_id,
    })
}

impl Store for SqliteStore {
    fn create_user(
        &self,
        profile: &UserProfile,
        greeting: MessageDraft,
    ) -> StoreResult<(UserProfile, ChatMessage)> {
        check_drafts(std::slice::from_ref(&greeting))?;
        self.write(|tx| {
            let taken = tx
                .query_row(
                    "SELECT 1 FROM users WHERE email = ?1 COLLATE NOCASE",
                    [&profile.email],
                    |_| Ok(()),
                )
                .optional()?;
            if taken.is_some() {
                return Err(StoreError::Conflict(profile.email.clone()));
            }
            tx.execute(
                "INSERT INTO users (user_id, name, email, year_of_study, gender, major, instructor, course, created_at)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)",
                params![
                    profile.user_id,
                    profile.name,
                    profile.email,
                    profile.year_of_study,
                    profile.gender,
                    profile.major,
                    profile.instructor,
                    profile.course,
                    profile.created_at.to_string(),
                ],
            )?;
            let at = Timestamp::now().max(profile.created_at);
            let msg = new_message(&profile.user_id, greeting, 1, at)?;
            insert_message(tx, &msg)?;
            Ok((profile.clone(), msg))
        })
    }

    fn get_user(&self, user_id: &str) -> StoreResult<UserProfile> {
        let conn = self.conn.lock();
        conn.query_row(
            "SELECT user_id, name, email, year_of_study, gender, major, instructor, course, created_at
             FROM users WHERE user_id = ?1",
            [user_id],
            profile_from_row,
        )
        .optional()?
        .ok_or_else(|| StoreError::NotFound(user_id.to_owned()))
    }

    fn append_turn(&self, user_id: &str, drafts: Vec<MessageDraft>) -> StoreResult<Vec<ChatMessage>> {
        check_drafts(&drafts)?;
        self.write(|tx| {
            require_user(tx, user_id)?;
            let last: Option<(i64, String)> = tx
                .query_row(
                    "SELECT seq, timestamp FROM chat_history WHERE user_id = ?1 ORDER BY seq DESC LIMIT 1",
                    [user_id],
                    |r| Ok((r.get(0)?, r.get(1)?)),
                )
                .optional()?;
            let (mut seq, mut floor) = match last {
                Some((seq, ts)) => (seq as u64, Some(parse_ts(ts)?)),
                None => (0, None),
            };
            let mut written = Vec::with_capacity(drafts.len());
            for (i, draft) in drafts.into_iter().enumerate() {
                if i == 1 {
                    self.faults.check()?;
                }
                seq += 1;
                let now = Timestamp::now();
                let at = floor.map_or(now, |f| f.max(now));
                let msg = new_message(user_id, draft, seq, at)?;
                insert_message(tx, &msg)?;
                floor = Some(at);
                written.push(msg);
            }
            Ok(written)
        })
    }

    fn get_history(&self, user_id: &str) -> StoreResult<Vec<ChatMessage>> {
        let conn = self.conn.lock();
        require_user(&conn, user_id)?;
        let mut stmt = conn.prepare(
            "SELECT message_id, user_id, sender, content, timestamp, seq, module_id
             FROM chat_history WHERE user_id = ?1 ORDER BY seq ASC",
        )?;
        let rows = stmt.query_map([user_id], message_from_row)?;
        Ok(rows.collect::<rusqlite::Result<Vec<_>>>()?)
    }

    fn mark_complete(&self, user_id: &str, module: ModuleId) -> StoreResult<CompletionRecord> {
        self.write(|tx| {
            require_user(tx, user_id)?;
            tx.execute(
                "INSERT INTO module_progress (user_id, module_id, completed, completed_at)
                 VALUES (?1, ?2, 1, ?3)
                 ON CONFLICT (user_id, module_id) DO NOTHING",
                params![user_id, module.as_str(), Timestamp::now().to_string()],
            )?;
            let (completed, at): (bool, Option<String>) = tx.query_row(
                "SELECT completed, completed_at FROM module_progress WHERE user_id = ?1 AND module_id = ?2",
                params![user_id, module.as_str()],
                |r| Ok((r.get(0)?, r.get(1)?)),
            )?;
            Ok(CompletionRecord {
                completed,
                completed_at: at.map(parse_ts).transpose()?,
            })
        })
    }

    fn get_progress(&self, user_id: &str) -> StoreResult<BTreeMap<ModuleId, CompletionRecord>> {
        let conn = self.conn.lock();
        require_user(&conn, user_id)?;
        let mut progress: BTreeMap<ModuleId, CompletionRecord> =
            ModuleId::ALL.into_iter().map(|m| (m, CompletionRecord::default())).collect();
        let mut stmt = conn.prepare(
            "SELECT module_id, completed, completed_at FROM module_progress WHERE user_id = ?1",
        )?;
        let rows = stmt.query_map([user_id], |r| {
            Ok((
                parse_module(r.get(0)?)?,
                CompletionRecord {
                    completed: r.get(1)?,
                    completed_at: r.get::<_, Option<String>>(2)?.map(parse_ts).transpose()?,
                },
            ))
        })?;
        for row in rows {
            let (module, record) = row?;
            progress.insert(module, record);
        }
        Ok(progress)
    }

    fn record_quiz_score(&self, user_id: &str, module: ModuleId, score: f64) -> StoreResult<QuizRecord> {
        self.write(|tx| {
            require_user(tx, user_id)?;
            let now = Timestamp::now();
            tx.execute(
                "INSERT INTO quiz_attempts (user_id, module_id, score, attempt_count, updated_at)
                 VALUES (?1, ?2, ?3, 1, ?4)
                 ON CONFLICT (user_id, module_id) DO UPDATE SET
                     score = excluded.score,
                     attempt_count = attempt_count + 1,
                     updated_at = excluded.updated_at",
                params![user_id, module.as_str(), score, now.to_string()],
            )?;
            let attempt_count: u32 = tx.query_row(
                "SELECT attempt_count FROM quiz_attempts WHERE user_id = ?1 AND module_id = ?2",
                params![user_id, module.as_str()],
                |r| r.get(0),
            )?;
            Ok(QuizRecord {
                score,
                attempt_count,
                updated_at: now,
            })
        })
    }

    fn latest_quiz(&self, user_id: &str, module: ModuleId) -> StoreResult<Option<QuizRecord>> {
        let conn = self.conn.lock();
        require_user(&conn, user_id)?;
        let row = conn
            .query_row(
                "SELECT score, attempt_count, updated_at FROM quiz_attempts WHERE user_id = ?1 AND module_id = ?2",
                params![user_id, module.as_str()],
                |r| Ok((r.get::<_, f64>(0)?, r.get::<_, u32>(1)?, r.get::<_, String>(2)?)),
            )
            .optional()?;
        row.map(|(score, attempt_count, at)| {
            Ok(QuizRecord {
                score,
                attempt_count,
                updated_at: parse_ts(at)?,
            })
        })
        .transpose()
    }

    fn acknowledge_view(&self, user_id: &str, module: ModuleId) -> StoreResult<()> {
        self.write(|tx| {
            require_user(tx, user_id)?;
            tx.execute(
                "INSERT INTO module_views (user_id, module_id, viewed_at) VALUES (?1, ?2, ?3)
                 ON CONFLICT (user_id, module_id) DO NOTHING",
                params![user_id, module.as_str(), Timestamp::now().to_string()],
            )?;
            Ok(())
        })
    }

    fn has_viewed(&self, user_id: &str, module: ModuleId) -> StoreResult<bool> {
        let conn = self.conn.lock();
        require_user(&conn, user_id)?;
        Ok(conn
            .query_row(
                "SELECT 1 FROM module_views WHERE user_id = ?1 AND module_id = ?2",
                params![user_id, module.as_str()],
                |_| Ok(()),
            )
            .optional()?
            .is_some())
    }

    fn reflection_count(&self, user_id: &str, module: ModuleId) -> StoreResult<usize> {
        let conn = self.conn.lock();
        require_user(&conn, user_id)?;
        let n: i64 = conn.query_row(
            "SELECT COUNT(*) FROM chat_history WHERE user_id = ?1 AND sender = 'user' AND module_id = ?2",
            params![user_id, module.as_str()],
            |r| r.get(0),
        )?;
        Ok(n as usize)
    }
}

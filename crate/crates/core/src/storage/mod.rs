//! Persistence for learners, chat history, module progress and quiz attempts.
//!
//! Every mutating call is durable before it returns. A chat turn is written
//! as one unit: either all of its messages are stored with consecutive
//! sequence numbers or none are.

mod memory;
mod sqlite;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ChatMessage, CompletionRecord, ModuleId, Sender, Timestamp, UserProfile};

pub use memory::MemoryStore;
pub use sqlite::SqliteStore;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("user `{0}` not found")]
    NotFound(String),
    #[error("email `{0}` is already registered")]
    Conflict(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("storage failure: {0}")]
    Storage(String),
}

impl From<rusqlite::Error> for StoreError {
    fn from(err: rusqlite::Error) -> Self {
        StoreError::Storage(err.to_string())
    }
}

pub type StoreResult<T> = Result<T, StoreError>;

/// A message waiting to be persisted; the store assigns id, seq and timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageDraft {
    pub sender: Sender,
    pub content: String,
    pub module_id: Option<ModuleId>,
}

impl MessageDraft {
    pub fn new(sender: Sender, content: impl Into<String>) -> Self {
        Self {
            sender,
            content: content.into(),
            module_id: None,
        }
    }

    pub fn tagged(mut self, module: Option<ModuleId>) -> Self {
        self.module_id = module;
        self
    }
}

/// Latest quiz outcome for one learner and module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuizRecord {
    pub score: f64,
    pub attempt_count: u32,
    pub updated_at: Timestamp,
}

impl QuizRecord {
    pub fn passed(&self) -> bool {
        self.score >= 1.0
    }
}

/// Storage contract shared by the in-memory and relational backends.
pub trait Store: Send + Sync {
    /// Persists a new learner together with their greeting (seq 1).
    fn create_user(
        &self,
        profile: &UserProfile,
        greeting: MessageDraft,
    ) -> StoreResult<(UserProfile, ChatMessage)>;

    fn get_user(&self, user_id: &str) -> StoreResult<UserProfile>;

    /// Appends all drafts atomically with consecutive seq values.
    fn append_turn(&self, user_id: &str, drafts: Vec<MessageDraft>) -> StoreResult<Vec<ChatMessage>>;

    fn get_history(&self, user_id: &str) -> StoreResult<Vec<ChatMessage>>;

    /// Idempotent: a second call returns the original record.
    fn mark_complete(&self, user_id: &str, module: ModuleId) -> StoreResult<CompletionRecord>;

    /// Always contains all six modules.
    fn get_progress(&self, user_id: &str) -> StoreResult<BTreeMap<ModuleId, CompletionRecord>>;

    /// Replaces the latest score and bumps the attempt counter.
    fn record_quiz_score(&self, user_id: &str, module: ModuleId, score: f64) -> StoreResult<QuizRecord>;

    fn latest_quiz(&self, user_id: &str, module: ModuleId) -> StoreResult<Option<QuizRecord>>;

    fn acknowledge_view(&self, user_id: &str, module: ModuleId) -> StoreResult<()>;

    fn has_viewed(&self, user_id: &str, module: ModuleId) -> StoreResult<bool>;

    /// Number of user-authored messages tagged with `module`.
    fn reflection_count(&self, user_id: &str, module: ModuleId) -> StoreResult<usize>;
}

/// Switchable failure injected between the first and second write of a turn.
#[derive(Debug, Clone, Default)]
pub struct FaultInjector(Arc<AtomicBool>);

impl FaultInjector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn arm(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn disarm(&self) {
        self.0.store(false, Ordering::SeqCst);
    }

    pub(crate) fn check(&self) -> StoreResult<()> {
        if self.0.load(Ordering::SeqCst) {
            Err(StoreError::Storage("injected fault mid-turn".into()))
        } else {
            Ok(())
        }
    }
}

/// Opens a store from a connection string.
///
/// `memory:` gives a process-local store; `sqlite:<path>` or
/// `sqlite://<path>` opens (creating if needed) a database file, and
/// `sqlite::memory:` an in-memory SQLite database.
pub fn open_store(url: &str) -> StoreResult<Arc<dyn Store>> {
    if url == "memory:" || url == "memory" {
        return Ok(Arc::new(MemoryStore::new()));
    }
    let path = url
        .strip_prefix("sqlite://")
        .or_else(|| url.strip_prefix("sqlite:"))
        .ok_or_else(|| StoreError::Storage(format!("unsupported connection string `{url}`")))?;
    if path == ":memory:" {
        return Ok(Arc::new(SqliteStore::open_in_memory()?));
    }
    Ok(Arc::new(SqliteStore::open(path)?))
}

pub(crate) fn check_drafts(drafts: &[MessageDraft]) -> StoreResult<()> {
    if drafts.is_empty() {
        return Err(StoreError::Precondition("a turn needs at least one message".into()));
    }
    if drafts.iter().any(|d| d.content.trim().is_empty()) {
        return Err(StoreError::Precondition("message content must not be empty".into()));
    }
    Ok(())
}

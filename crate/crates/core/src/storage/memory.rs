use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};

use super::{check_drafts, FaultInjector, MessageDraft, QuizRecord, Store, StoreError, StoreResult};
use crate::domain::{random_hex_id, ChatMessage, CompletionRecord, ModuleId, Sender, Timestamp, UserProfile};

#[derive(Debug)]
struct UserState {
    profile: UserProfile,
    history: Vec<ChatMessage>,
    progress: BTreeMap<ModuleId, CompletionRecord>,
    quizzes: BTreeMap<ModuleId, QuizRecord>,
    views: BTreeSet<ModuleId>,
}

#[derive(Debug, Default)]
struct Index {
    users: HashMap<String, Arc<Mutex<UserState>>>,
    emails: HashMap<String, String>,
}

/// Process-local store. Each learner has their own lock, so turns for
/// different learners never contend.
#[derive(Debug, Default)]
pub struct MemoryStore {
    index: RwLock<Index>,
    faults: FaultInjector,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fault_injector(faults: FaultInjector) -> Self {
        Self {
            index: RwLock::default(),
            faults,
        }
    }

    fn user(&self, user_id: &str) -> StoreResult<Arc<Mutex<UserState>>> {
        self.index
            .read()
            .users
            .get(user_id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(user_id.to_owned()))
    }
}

fn stage(
    user_id: &str,
    last: Option<&ChatMessage>,
    draft: MessageDraft,
    seq: u64,
) -> StoreResult<ChatMessage> {
    let now = Timestamp::now();
    let timestamp = last.map_or(now, |m| m.timestamp.max(now));
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

impl Store for MemoryStore {
    fn create_user(
        &self,
        profile: &UserProfile,
        greeting: MessageDraft,
    ) -> StoreResult<(UserProfile, ChatMessage)> {
        check_drafts(std::slice::from_ref(&greeting))?;
        let mut index = self.index.write();
        let email_key = profile.email.to_lowercase();
        if index.emails.contains_key(&email_key) {
            return Err(StoreError::Conflict(profile.email.clone()));
        }
        if index.users.contains_key(&profile.user_id) {
            return Err(StoreError::Storage(format!("duplicate user id `{}`", profile.user_id)));
        }
        let mut first = stage(&profile.user_id, None, greeting, 1)?;
        first.timestamp = first.timestamp.max(profile.created_at);
        let state = UserState {
            profile: profile.clone(),
            history: vec![first.clone()],
            progress: BTreeMap::new(),
            quizzes: BTreeMap::new(),
            views: BTreeSet::new(),
        };
        index.emails.insert(email_key, profile.user_id.clone());
        index
            .users
            .insert(profile.user_id.clone(), Arc::new(Mutex::new(state)));
        Ok((profile.clone(), first))
    }

    fn get_user(&self, user_id: &str) -> StoreResult<UserProfile> {
        Ok(self.user(user_id)?.lock().profile.clone())
    }

    fn append_turn(&self, user_id: &str, drafts: Vec<MessageDraft>) -> StoreResult<Vec<ChatMessage>> {
        check_drafts(&drafts)?;
        let user = self.user(user_id)?;
        let mut state = user.lock();
        let base = state.history.last().map_or(0, |m| m.seq);
        let mut staged: Vec<ChatMessage> = Vec::with_capacity(drafts.len());
        for (i, draft) in drafts.into_iter().enumerate() {
            if i == 1 {
                self.faults.check()?;
            }
            let last = staged.last().or(state.history.last());
            let msg = stage(user_id, last, draft, base + i as u64 + 1)?;
            staged.push(msg);
        }
        state.history.extend(staged.iter().cloned());
        Ok(staged)
    }

    fn get_history(&self, user_id: &str) -> StoreResult<Vec<ChatMessage>> {
        Ok(self.user(user_id)?.lock().history.clone())
    }

    fn mark_complete(&self, user_id: &str, module: ModuleId) -> StoreResult<CompletionRecord> {
        let user = self.user(user_id)?;
        let mut state = user.lock();
        let record = state
            .progress
            .entry(module)
            .or_insert_with(|| CompletionRecord::completed_at(Timestamp::now()));
        Ok(*record)
    }

    fn get_progress(&self, user_id: &str) -> StoreResult<BTreeMap<ModuleId, CompletionRecord>> {
        let user = self.user(user_id)?;
        let state = user.lock();
        Ok(ModuleId::ALL
            .into_iter()
            .map(|m| (m, state.progress.get(&m).copied().unwrap_or_default()))
            .collect())
    }

    fn record_quiz_score(&self, user_id: &str, module: ModuleId, score: f64) -> StoreResult<QuizRecord> {
        let user = self.user(user_id)?;
        let mut state = user.lock();
        let attempt_count = state.quizzes.get(&module).map_or(0, |q| q.attempt_count) + 1;
        let record = QuizRecord {
            score,
            attempt_count,
            updated_at: Timestamp::now(),
        };
        state.quizzes.insert(module, record);
        Ok(record)
    }

    fn latest_quiz(&self, user_id: &str, module: ModuleId) -> StoreResult<Option<QuizRecord>> {
        Ok(self.user(user_id)?.lock().quizzes.get(&module).copied())
    }

    fn acknowledge_view(&self, user_id: &str, module: ModuleId) -> StoreResult<()> {
        self.user(user_id)?.lock().views.insert(module);
        Ok(())
    }

    fn has_viewed(&self, user_id: &str, module: ModuleId) -> StoreResult<bool> {
        Ok(self.user(user_id)?.lock().views.contains(&module))
    }

    fn reflection_count(&self, user_id: &str, module: ModuleId) -> StoreResult<usize> {
        let user = self.user(user_id)?;
        let state = user.lock();
        Ok(state
            .history
            .iter()
            .filter(|m| m.sender == Sender::User && m.module_id == Some(module))
            .count())
    }
}

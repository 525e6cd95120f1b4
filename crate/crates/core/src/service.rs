//! Request-level workflows: onboarding, chat turns, reflections, quizzes and
//! progress. Holds no per-learner state; everything is read from the store
//! on each call.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::curriculum::{
    evaluate_completion, score_quiz, unlocked_modules, CompletionRule, Curriculum, ModuleActivity,
    QuizAttempt, QuizError, QuizResult,
};
use crate::domain::{
    new_user_id, ChatMessage, CompletionRecord, ModuleId, Registration, Sender, Timestamp,
    UserProfile, ValidationError,
};
use crate::gateway::{
    assemble_context, build_system_prompt, enforce_window, generate, render_greeting,
    FeedbackWindow, GatewayError, PersonaPrompt, Provider, DEFAULT_PROVIDER_TIMEOUT,
};
use crate::storage::{MessageDraft, Store, StoreError};

/// Longest chat message or reflection accepted, in characters.
pub const MAX_MESSAGE_CHARS: usize = 4000;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid {field}: {message}")]
    Validation { field: &'static str, message: String },
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Forbidden(String),
    #[error("{0}")]
    Upstream(String),
    #[error("{0}")]
    Storage(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        ServiceError::Validation {
            field,
            message: message.into(),
        }
    }
}

impl From<StoreError> for ServiceError {
    fn from(err: StoreError) -> Self {
        match err {
            StoreError::NotFound(_) => ServiceError::NotFound(err.to_string()),
            StoreError::Conflict(_) => ServiceError::Conflict(err.to_string()),
            StoreError::Precondition(m) => ServiceError::invalid("message", m),
            StoreError::Storage(_) => ServiceError::Storage(err.to_string()),
        }
    }
}

impl From<GatewayError> for ServiceError {
    fn from(err: GatewayError) -> Self {
        match err {
            GatewayError::Config(m) => ServiceError::Internal(m),
            GatewayError::Validation(m) => ServiceError::invalid("message", m),
            GatewayError::Upstream(e) => ServiceError::Upstream(e.to_string()),
        }
    }
}

impl From<ValidationError> for ServiceError {
    fn from(err: ValidationError) -> Self {
        ServiceError::Validation {
            field: err.field,
            message: err.message,
        }
    }
}

impl From<QuizError> for ServiceError {
    fn from(err: QuizError) -> Self {
        ServiceError::invalid("assignments", err.to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Registered {
    pub profile: UserProfile,
    pub greeting: ChatMessage,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChatTurn {
    pub message: ChatMessage,
    pub reply: ChatMessage,
    #[serde(skip)]
    pub provider_latency: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuleStatus {
    pub id: ModuleId,
    pub order: u8,
    pub title: String,
    pub completion_rule: CompletionRule,
    pub completed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completed_at: Option<Timestamp>,
    pub unlocked: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuizOutcome {
    #[serde(flatten)]
    pub result: QuizResult,
    pub attempt_count: u32,
    pub module_completed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReflectionOutcome {
    pub reflection: ChatMessage,
    pub feedback: ChatMessage,
    pub module_completed: bool,
}

/// The mentoring service behind the HTTP surface.
pub struct Mentor {
    store: Arc<dyn Store>,
    provider: Arc<dyn Provider>,
    curriculum: Arc<Curriculum>,
    persona: PersonaPrompt,
    window: FeedbackWindow,
    provider_timeout: Duration,
}

impl Mentor {
    pub fn new(store: Arc<dyn Store>, provider: Arc<dyn Provider>, curriculum: Arc<Curriculum>) -> Self {
        Self {
            store,
            provider,
            curriculum,
            persona: PersonaPrompt::default(),
            window: FeedbackWindow::default(),
            provider_timeout: DEFAULT_PROVIDER_TIMEOUT,
        }
    }

    pub fn with_persona(mut self, persona: PersonaPrompt) -> Self {
        self.persona = persona;
        self
    }

    pub fn with_window(mut self, window: FeedbackWindow) -> Self {
        self.window = window;
        self
    }

    pub fn with_provider_timeout(mut self, timeout: Duration) -> Self {
        self.provider_timeout = timeout;
        self
    }

    pub fn curriculum(&self) -> &Curriculum {
        &self.curriculum
    }

    pub fn store(&self) -> &Arc<dyn Store> {
        &self.store
    }

    pub fn register(&self, form: Registration) -> Result<Registered, ServiceError> {
        form.validate()?;
        let user_id = new_user_id().map_err(|e| ServiceError::Internal(e.to_string()))?;
        let profile = UserProfile::from_registration(user_id, form, Timestamp::now())?;
        let greeting = enforce_window(&render_greeting(&profile), self.window);
        let (profile, greeting) = self
            .store
            .create_user(&profile, MessageDraft::new(Sender::Empa, greeting))?;
        Ok(Registered { profile, greeting })
    }

    pub async fn chat(&self, user_id: &str, message: &str) -> Result<ChatTurn, ServiceError> {
        self.run_turn(user_id, message, None).await
    }

    pub fn history(&self, user_id: &str) -> Result<Vec<ChatMessage>, ServiceError> {
        Ok(self.store.get_history(user_id)?)
    }

    pub fn progress(&self, user_id: &str) -> Result<Vec<ModuleStatus>, ServiceError> {
        let progress = self.store.get_progress(user_id)?;
        Ok(self.statuses(&progress))
    }

    /// Records that the learner viewed a module; completes view-only modules.
    pub fn acknowledge_view(&self, user_id: &str, module: ModuleId) -> Result<ModuleStatus, ServiceError> {
        self.ensure_unlocked(user_id, module)?;
        self.store.acknowledge_view(user_id, module)?;
        self.refresh_completion(user_id, module)?;
        let progress = self.store.get_progress(user_id)?;
        let status = self
            .statuses(&progress)
            .into_iter()
            .find(|s| s.id == module)
            .expect("every module has a status");
        Ok(status)
    }

    pub fn submit_quiz(
        &self,
        user_id: &str,
        module: ModuleId,
        quiz_id: &str,
        assignments: BTreeMap<String, String>,
    ) -> Result<QuizOutcome, ServiceError> {
        self.store.get_user(user_id)?;
        let definition = self
            .curriculum
            .module(module)
            .quiz
            .as_ref()
            .ok_or_else(|| ServiceError::NotFound(format!("module `{module}` has no quiz")))?;
        self.ensure_unlocked(user_id, module)?;
        let attempt = QuizAttempt {
            quiz_id: quiz_id.to_owned(),
            assignments,
            submitted_at: Timestamp::now(),
        };
        let result = score_quiz(definition, &attempt)?;
        let record = self.store.record_quiz_score(user_id, module, result.score)?;
        let module_completed = self.refresh_completion(user_id, module)?;
        Ok(QuizOutcome {
            result,
            attempt_count: record.attempt_count,
            module_completed,
        })
    }

    /// Stores a reflection as a module-tagged chat turn and returns Empa's feedback.
    pub async fn submit_reflection(
        &self,
        user_id: &str,
        module: ModuleId,
        text: &str,
    ) -> Result<ReflectionOutcome, ServiceError> {
        self.ensure_unlocked(user_id, module)?;
        let turn = self.run_turn(user_id, text, Some(module)).await?;
        let module_completed = self.refresh_completion(user_id, module)?;
        Ok(ReflectionOutcome {
            reflection: turn.message,
            feedback: turn.reply,
            module_completed,
        })
    }

    async fn run_turn(
        &self,
        user_id: &str,
        text: &str,
        module: Option<ModuleId>,
    ) -> Result<ChatTurn, ServiceError> {
        let field = if module.is_some() { "text" } else { "message" };
        let text = text.trim();
        if text.is_empty() {
            return Err(ServiceError::invalid(field, "must not be empty"));
        }
        if text.chars().count() > MAX_MESSAGE_CHARS {
            return Err(ServiceError::invalid(
                field,
                format!("must be at most {MAX_MESSAGE_CHARS} characters"),
            ));
        }
        let profile = self.store.get_user(user_id)?;
        let history = self.store.get_history(user_id)?;
        let system = build_system_prompt(&profile, &self.persona);
        let context = assemble_context(system, &history, text)?;
        let response = generate(&context, self.provider.as_ref(), self.provider_timeout).await?;
        let reply = enforce_window(&response.content, self.window);
        let mut stored = self.store.append_turn(
            user_id,
            vec![
                MessageDraft::new(Sender::User, text).tagged(module),
                MessageDraft::new(Sender::Empa, reply).tagged(module),
            ],
        )?;
        let reply = stored.pop().expect("two messages stored");
        let message = stored.pop().expect("two messages stored");
        Ok(ChatTurn {
            message,
            reply,
            provider_latency: response.provider_latency,
        })
    }

    fn ensure_unlocked(&self, user_id: &str, module: ModuleId) -> Result<(), ServiceError> {
        let progress = self.store.get_progress(user_id)?;
        if unlocked_modules(&progress).contains(&module) {
            Ok(())
        } else {
            Err(ServiceError::Forbidden(format!("module `{module}` is locked")))
        }
    }

    fn refresh_completion(&self, user_id: &str, module: ModuleId) -> Result<bool, ServiceError> {
        let definition = self.curriculum.module(module);
        let activity = ModuleActivity {
            accepted_reflections: self.store.reflection_count(user_id, module)?,
            latest_quiz_passed: self
                .store
                .latest_quiz(user_id, module)?
                .is_some_and(|q| q.passed()),
            viewed: self.store.has_viewed(user_id, module)?,
        };
        if evaluate_completion(definition, &activity) {
            self.store.mark_complete(user_id, module)?;
            return Ok(true);
        }
        let progress = self.store.get_progress(user_id)?;
        Ok(progress.get(&module).is_some_and(|r| r.completed))
    }

    fn statuses(&self, progress: &BTreeMap<ModuleId, CompletionRecord>) -> Vec<ModuleStatus> {
        let unlocked = unlocked_modules(progress);
        self.curriculum
            .modules()
            .iter()
            .map(|m| {
                let record = progress.get(&m.id).copied().unwrap_or_default();
                ModuleStatus {
                    id: m.id,
                    order: m.id.order(),
                    title: m.title.clone(),
                    completion_rule: m.completion_rule,
                    completed: record.completed,
                    completed_at: record.completed_at,
                    unlocked: unlocked.contains(&m.id),
                }
            })
            .collect()
    }
}

//! Context assembly, persona prompt, provider invocation and reply shaping.

mod http;
mod mock;
mod window;

use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ChatMessage, ModuleId, Role, UserProfile};

pub use http::{HttpProvider, HttpProviderConfig, DEFAULT_RESPONSE_PATH, DEFAULT_TOKEN_BUDGET};
pub use mock::{MockMode, MockProvider};
pub use window::{count_words, enforce_window, FeedbackWindow, DEFAULT_MAX_WORDS};

pub const DEFAULT_PROVIDER_TIMEOUT: Duration = Duration::from_secs(30);

/// Persona wording the system prompt must always carry.
pub const PERSONA_CLAUSE: &str = "friendly, helpful, and knowledgeable";

pub const DEFAULT_PERSONA_TEMPLATE: &str = "You are Empa, a friendly, helpful, and knowledgeable \
mentor focused on interpersonal and intercultural collaboration. You are coaching {name}, who is \
studying {major} and taking {course}. Help {name} reflect on how cultural values such as power \
distance, communication style, individualism versus collectivism, and time orientation shape \
teamwork, and relate your guidance to collaboration in their field. Address {name} by name, be \
warm and encouraging, ask one reflective question when it helps, and keep every reply under 80 \
words.";

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("upstream error: {0}")]
    Upstream(#[from] ProviderError),
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider timed out after {0:?}")]
    Timeout(Duration),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("provider transport failure: {0}")]
    Transport(String),
    #[error("provider response could not be parsed: {0}")]
    Malformed(String),
    #[error("provider unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub role: Role,
    pub content: String,
}

impl ContextEntry {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

/// Ordered, role-tagged messages handed to a provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConversationContext {
    entries: Vec<ContextEntry>,
}

impl ConversationContext {
    /// Builds a context from raw entries, checking every invariant.
    pub fn from_entries(entries: Vec<ContextEntry>) -> Result<Self, GatewayError> {
        let ctx = Self { entries };
        ctx.check()?;
        Ok(ctx)
    }

    pub fn entries(&self) -> &[ContextEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_user_message(&self) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.role == Role::User)
            .map(|e| e.content.as_str())
    }

    /// System entry first and only once, user entry last, strict
    /// user/assistant alternation in between, no empty content.
    pub fn check(&self) -> Result<(), GatewayError> {
        let invalid = |msg: &str| Err(GatewayError::Validation(format!("invalid context: {msg}")));
        let Some(first) = self.entries.first() else {
            return invalid("no entries");
        };
        if first.role != Role::System {
            return invalid("first entry must be the system prompt");
        }
        if self.entries.len() < 2 || self.entries.last().map(|e| e.role) != Some(Role::User) {
            return invalid("last entry must come from the user");
        }
        if self.entries.iter().any(|e| e.content.trim().is_empty()) {
            return invalid("empty entry");
        }
        let rest = &self.entries[1..];
        if rest.iter().any(|e| e.role == Role::System) {
            return invalid("system entry after position 0");
        }
        if rest.windows(2).any(|w| w[0].role == w[1].role) {
            return invalid("user and assistant entries must alternate");
        }
        Ok(())
    }

    /// Drops the oldest non-system entries until the estimated token count
    /// fits `budget`. The system prompt and the newest user entry are kept.
    pub fn fit_to_budget(&mut self, budget: usize) {
        while self.entries.len() > 2 && estimate_tokens(&self.entries) > budget {
            let drop = if self.entries.len() > 3 { 2 } else { 1 };
            self.entries.drain(1..1 + drop);
        }
    }
}

/// Rough provider token estimate: four characters per token plus a small
/// per-message overhead.
pub fn estimate_tokens(entries: &[ContextEntry]) -> usize {
    entries
        .iter()
        .map(|e| e.content.chars().count().div_ceil(4) + 4)
        .sum()
}

/// System prompt template carrying `{name}`, `{major}` and `{course}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersonaPrompt {
    template: String,
}

impl PersonaPrompt {
    pub fn new(template: impl Into<String>) -> Result<Self, GatewayError> {
        let template = template.into();
        for placeholder in ["{name}", "{major}", "{course}"] {
            if !template.contains(placeholder) {
                return Err(GatewayError::Config(format!(
                    "persona template is missing the {placeholder} placeholder"
                )));
            }
        }
        if !template.contains(PERSONA_CLAUSE) {
            return Err(GatewayError::Config(format!(
                "persona template must contain \"{PERSONA_CLAUSE}\""
            )));
        }
        Ok(Self { template })
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    fn render(&self, profile: &UserProfile) -> String {
        self.template
            .replace("{name}", &profile.name)
            .replace("{major}", &profile.major)
            .replace("{course}", &profile.course)
    }
}

impl Default for PersonaPrompt {
    fn default() -> Self {
        Self::new(DEFAULT_PERSONA_TEMPLATE).expect("default persona template is valid")
    }
}

pub fn build_system_prompt(profile: &UserProfile, persona: &PersonaPrompt) -> ContextEntry {
    ContextEntry::new(Role::System, persona.render(profile))
}

/// Greeting stored at registration. Rendered from a template so onboarding
/// never depends on the provider.
pub fn render_greeting(profile: &UserProfile) -> String {
    let titles: Vec<&str> = ModuleId::ALL.iter().map(|m| m.title()).collect();
    format!(
        "Hi {name}! I'm Empa, your guide to intercultural collaboration. As a {major} student in \
         {course}, you'll work with people whose cultures shape how they communicate and decide. \
         Our journey has six modules: {list}. Each unlocks once you finish the one before it. \
         Ask me anything along the way!",
        name = profile.name,
        major = profile.major,
        course = profile.course,
        list = titles.join(", "),
    )
}

/// Maps stored history onto provider roles and appends the new user message.
pub fn assemble_context(
    system: ContextEntry,
    history: &[ChatMessage],
    new_message: &str,
) -> Result<ConversationContext, GatewayError> {
    if new_message.trim().is_empty() {
        return Err(GatewayError::Validation("message must not be empty".into()));
    }
    let mut entries = Vec::with_capacity(history.len() + 2);
    entries.push(system);
    entries.extend(
        history
            .iter()
            .map(|m| ContextEntry::new(m.sender.role(), m.content.clone())),
    );
    entries.push(ContextEntry::new(Role::User, new_message));
    Ok(ConversationContext { entries })
}

#[async_trait]
pub trait Provider: Send + Sync {
    async fn complete(&self, context: &ConversationContext) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderResponse {
    pub content: String,
    pub provider_latency: Duration,
}

/// Invokes `provider` once under `timeout`. No retries.
pub async fn generate(
    context: &ConversationContext,
    provider: &dyn Provider,
    timeout: Duration,
) -> Result<ProviderResponse, GatewayError> {
    context.check()?;
    let started = Instant::now();
    let content = tokio::time::timeout(timeout, provider.complete(context))
        .await
        .map_err(|_| ProviderError::Timeout(timeout))??;
    if content.trim().is_empty() {
        return Err(ProviderError::Malformed("empty completion".into()).into());
    }
    Ok(ProviderResponse {
        content,
        provider_latency: started.elapsed(),
    })
}

//! Core of the Empa intercultural-mentoring service.
//!
//! * [`domain`]: learners, messages, modules and validation rules
//! * [`storage`]: durable persistence behind the [`Store`] contract
//! * [`gateway`]: context assembly, persona prompt, providers, word budget
//! * [`curriculum`]: module definitions, sequential unlocking, quiz scoring
//! * [`service`]: the request-level workflows tying them together

pub mod curriculum;
pub mod domain;
pub mod gateway;
pub mod service;
pub mod storage;

pub use curriculum::{Curriculum, ModuleDefinition, QuizDefinition, QuizResult};
pub use domain::{
    ChatMessage, CompletionRecord, CulturalDimension, ModuleId, Registration, Role, Sender,
    Timestamp, UserProfile,
};
pub use gateway::{ConversationContext, FeedbackWindow, PersonaPrompt, Provider};
pub use service::{Mentor, ServiceError};
pub use storage::{MemoryStore, SqliteStore, Store};

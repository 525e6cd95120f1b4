//! The six-module curriculum, its sequential unlocking rule and per-module
//! completion rules.

mod quiz;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CompletionRecord, ModuleId};

pub use quiz::{score_quiz, QuizAttempt, QuizDefinition, QuizError, QuizItem, QuizResult};

/// Curriculum shipped with the service.
pub const DEFAULT_CURRICULUM: &str = include_str!("default_curriculum.json");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{location}: {message}")]
pub struct CurriculumError {
    pub location: String,
    pub message: String,
}

impl CurriculumError {
    pub(crate) fn at(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            location: location.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionRule {
    ReflectionSubmitted,
    QuizPassed,
    Both,
    ViewOnly,
}

impl CompletionRule {
    pub fn needs_quiz(self) -> bool {
        matches!(self, CompletionRule::QuizPassed | CompletionRule::Both)
    }

    pub fn needs_reflection(self) -> bool {
        matches!(self, CompletionRule::ReflectionSubmitted | CompletionRule::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModuleDefinition {
    pub id: ModuleId,
    pub title: String,
    #[serde(rename = "media")]
    pub media_refs: Vec<String>,
    #[serde(rename = "prompts")]
    pub reflection_prompts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quiz: Option<QuizDefinition>,
    pub completion_rule: CompletionRule,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    version: String,
    modules: Vec<RawModule>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModule {
    id: String,
    title: String,
    #[serde(default)]
    media: Vec<String>,
    #[serde(default)]
    prompts: Vec<String>,
    #[serde(default)]
    quiz: Option<QuizDefinition>,
    completion_rule: CompletionRule,
}

/// A validated curriculum: all six modules, in unlock order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Curriculum {
    pub version: String,
    modules: Vec<ModuleDefinition>,
}

impl Curriculum {
    pub fn modules(&self) -> &[ModuleDefinition] {
        &self.modules
    }

    pub fn module(&self, id: ModuleId) -> &ModuleDefinition {
        // load_curriculum guarantees modules[i].id == ModuleId::ALL[i]
        &self.modules[usize::from(id.order()) - 1]
    }

    pub fn builtin() -> Self {
        load_curriculum(DEFAULT_CURRICULUM).expect("built-in curriculum is valid")
    }
}

/// Parses and validates a curriculum document.
pub fn load_curriculum(source: &str) -> Result<Curriculum, CurriculumError> {
    let raw: RawDocument = serde_json::from_str(source).map_err(|e| {
        CurriculumError::at(format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    if raw.version.trim().is_empty() {
        return Err(CurriculumError::at("version", "must not be empty"));
    }
    if raw.modules.len() != ModuleId::ALL.len() {
        return Err(CurriculumError::at(
            "modules",
            format!("expected {} modules, found {}", ModuleId::ALL.len(), raw.modules.len()),
        ));
    }
    let mut seen = BTreeSet::new();
    let mut modules = Vec::with_capacity(raw.modules.len());
    for (i, (m, expected)) in raw.modules.into_iter().zip(ModuleId::ALL).enumerate() {
        let at = format!("modules[{i}]");
        let id: ModuleId = m
            .id
            .parse()
            .map_err(|e: String| CurriculumError::at(format!("{at}.id"), e))?;
        if !seen.insert(id) {
            return Err(CurriculumError::at(format!("{at}.id"), format!("duplicate module `{id}`")));
        }
        if id != expected {
            return Err(CurriculumError::at(
                format!("{at}.id"),
                format!("expected `{expected}` at position {}, found `{id}`", i + 1),
            ));
        }
        if m.title.trim().is_empty() {
            return Err(CurriculumError::at(format!("{at}.title"), "must not be empty"));
        }
        match (&m.quiz, m.completion_rule.needs_quiz()) {
            (Some(_), false) => {
                return Err(CurriculumError::at(
                    format!("{at}.quiz"),
                    "quiz present but the completion rule does not use it",
                ))
            }
            (None, true) => {
                return Err(CurriculumError::at(
                    format!("{at}.quiz"),
                    "completion rule requires a quiz",
                ))
            }
            (Some(q), true) => q.validate(&format!("{at}.quiz"))?,
            (None, false) => {}
        }
        if m.completion_rule.needs_reflection() && m.prompts.is_empty() {
            return Err(CurriculumError::at(
                format!("{at}.prompts"),
                "reflection modules need at least one prompt",
            ));
        }
        modules.push(ModuleDefinition {
            id,
            title: m.title,
            media_refs: m.media,
            reflection_prompts: m.prompts,
            quiz: m.quiz,
            completion_rule: m.completion_rule,
        });
    }
    Ok(Curriculum {
        version: raw.version,
        modules,
    })
}

/// Modules a learner may open: module 1 plus every module whose
/// predecessors are all complete. Always a prefix of the module order.
pub fn unlocked_modules(progress: &BTreeMap<ModuleId, CompletionRecord>) -> BTreeSet<ModuleId> {
    let mut unlocked = BTreeSet::new();
    for module in ModuleId::ALL {
        unlocked.insert(module);
        if !progress.get(&module).is_some_and(|r| r.completed) {
            break;
        }
    }
    unlocked
}

/// What a learner has done inside one module.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ModuleActivity {
    pub accepted_reflections: usize,
    pub latest_quiz_passed: bool,
    pub viewed: bool,
}

pub fn evaluate_completion(module: &ModuleDefinition, activity: &ModuleActivity) -> bool {
    let reflected = activity.accepted_reflections > 0;
    match module.completion_rule {
        CompletionRule::ReflectionSubmitted => reflected,
        CompletionRule::QuizPassed => activity.latest_quiz_passed,
        CompletionRule::Both => reflected && activity.latest_quiz_passed,
        CompletionRule::ViewOnly => activity.viewed,
    }
}

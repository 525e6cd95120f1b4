//! Drag-and-drop matching quizzes: learners drop characters into category bins.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::CurriculumError;
use crate::domain::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuizItem {
    pub character_id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuizDefinition {
    pub quiz_id: String,
    pub categories: Vec<String>,
    pub items: Vec<QuizItem>,
    pub answer_key: BTreeMap<String, String>,
}

impl QuizDefinition {
    pub(crate) fn validate(&self, at: &str) -> Result<(), CurriculumError> {
        if self.quiz_id.trim().is_empty() {
            return Err(CurriculumError::at(format!("{at}.quiz_id"), "must not be empty"));
        }
        if self.items.is_empty() {
            return Err(CurriculumError::at(format!("{at}.items"), "quiz has no characters"));
        }
        let mut categories = BTreeSet::new();
        for (i, c) in self.categories.iter().enumerate() {
            if c.trim().is_empty() || !categories.insert(c.as_str()) {
                return Err(CurriculumError::at(
                    format!("{at}.categories[{i}]"),
                    format!("empty or duplicate category `{c}`"),
                ));
            }
        }
        if categories.is_empty() {
            return Err(CurriculumError::at(format!("{at}.categories"), "quiz has no categories"));
        }
        let mut characters = BTreeSet::new();
        for (i, item) in self.items.iter().enumerate() {
            if item.character_id.trim().is_empty() || !characters.insert(item.character_id.as_str()) {
                return Err(CurriculumError::at(
                    format!("{at}.items[{i}].character_id"),
                    format!("empty or duplicate character `{}`", item.character_id),
                ));
            }
        }
        for (character, category) in &self.answer_key {
            if !characters.contains(character.as_str()) {
                return Err(CurriculumError::at(
                    format!("{at}.answer_key.{character}"),
                    format!("answer key references unknown character `{character}`"),
                ));
            }
            if !categories.contains(category.as_str()) {
                return Err(CurriculumError::at(
                    format!("{at}.answer_key.{character}"),
                    format!("category `{category}` is not one of the quiz categories"),
                ));
            }
        }
        if let Some(missing) = characters.iter().find(|c| !self.answer_key.contains_key(**c)) {
            return Err(CurriculumError::at(
                format!("{at}.answer_key"),
                format!("character `{missing}` has no answer"),
            ));
        }
        Ok(())
    }
}

/// A learner's placement of every character.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizAttempt {
    pub quiz_id: String,
    pub assignments: BTreeMap<String, String>,
    pub submitted_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizResult {
    pub correct_count: usize,
    pub total: usize,
    pub score: f64,
    pub passed: bool,
    /// Per-character correctness, for board feedback.
    pub correct: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuizError {
    #[error("attempt is for quiz `{got}`, expected `{expected}`")]
    QuizMismatch { expected: String, got: String },
    #[error("character `{0}` was not placed")]
    MissingCharacter(String),
    #[error("character `{0}` is not part of this quiz")]
    UnknownCharacter(String),
    #[error("category `{category}` for `{character}` is not a quiz category")]
    UnknownCategory { character: String, category: String },
}

/// Counts placements that agree with the answer key. Passing needs a perfect board.
pub fn score_quiz(definition: &QuizDefinition, attempt: &QuizAttempt) -> Result<QuizResult, QuizError> {
    if attempt.quiz_id != definition.quiz_id {
        return Err(QuizError::QuizMismatch {
            expected: definition.quiz_id.clone(),
            got: attempt.quiz_id.clone(),
        });
    }
    if let Some(extra) = attempt
        .assignments
        .keys()
        .find(|c| !definition.answer_key.contains_key(*c))
    {
        return Err(QuizError::UnknownCharacter(extra.clone()));
    }
    let mut correct = BTreeMap::new();
    for (character, answer) in &definition.answer_key {
        let placed = attempt
            .assignments
            .get(character)
            .ok_or_else(|| QuizError::MissingCharacter(character.clone()))?;
        if !definition.categories.contains(placed) {
            return Err(QuizError::UnknownCategory {
                character: character.clone(),
                category: placed.clone(),
            });
        }
        correct.insert(character.clone(), placed == answer);
    }
    let total = definition.answer_key.len();
    let correct_count = correct.values().filter(|ok| **ok).count();
    Ok(QuizResult {
        correct_count,
        total,
        score: correct_count as f64 / total as f64,
        passed: correct_count == total,
        correct,
    })
}

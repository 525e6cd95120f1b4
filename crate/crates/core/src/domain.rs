//! Shared domain types: learners, chat messages, roles, modules and the
//! validation rules every other layer relies on.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.3fZ";

/// A UTC instant with millisecond precision.
///
/// On the wire and in the relational store this is always rendered as
/// `YYYY-MM-DDTHH:MM:SS.mmmZ`, so a value survives a round trip unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    pub fn now() -> Self {
        Self::from_datetime(Utc::now())
    }

    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        Timestamp(dt.trunc_subsecs(3))
    }

    pub fn as_datetime(&self) -> DateTime<Utc> {
        self.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format(TIMESTAMP_FORMAT))
    }
}

impl FromStr for Timestamp {
    type Err = chrono::ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let dt = DateTime::parse_from_rfc3339(s)?;
        Ok(Self::from_datetime(dt.with_timezone(&Utc)))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error)]
#[error("entropy source unavailable: {0}")]
pub struct EntropyError(String);

/// Returns a fresh 128-bit random identifier as 32 lowercase hex characters.
pub fn new_user_id() -> Result<String, EntropyError> {
    random_hex_id()
}

pub(crate) fn random_hex_id() -> Result<String, EntropyError> {
    let mut bytes = [0u8; 16];
    getrandom::fill(&mut bytes).map_err(|e| EntropyError(e.to_string()))?;
    Ok(hex::encode(bytes))
}

/// Syntactic email check.
///
/// Accepts `local@domain` where the local part is non-empty, there is exactly
/// one `@`, the domain has at least two dot-separated labels and no label is
/// empty. Whitespace anywhere rejects the address.
pub fn validate_email(candidate: &str) -> bool {
    if candidate.chars().any(char::is_whitespace) {
        return false;
    }
    let Some((local, domain)) = candidate.split_once('@') else {
        return false;
    };
    if local.is_empty() || domain.contains('@') {
        return false;
    }
    let mut labels = 0;
    for label in domain.split('.') {
        if label.is_empty() {
            return false;
        }
        labels += 1;
    }
    labels >= 2
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {message}")]
pub struct ValidationError {
    pub field: &'static str,
    pub message: String,
}

impl ValidationError {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

/// Registration form as submitted by a learner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub name: String,
    pub email: String,
    pub year_of_study: String,
    pub gender: String,
    pub major: String,
    pub instructor: String,
    pub course: String,
}

impl Registration {
    /// Field names in the order the onboarding form presents them.
    pub const FIELDS: [&'static str; 7] = [
        "name",
        "email",
        "year_of_study",
        "gender",
        "major",
        "instructor",
        "course",
    ];

    pub fn validate(&self) -> Result<(), ValidationError> {
        let values = [
            &self.name,
            &self.email,
            &self.year_of_study,
            &self.gender,
            &self.major,
            &self.instructor,
            &self.course,
        ];
        for (field, value) in Self::FIELDS.iter().zip(values) {
            if value.trim().is_empty() {
                return Err(ValidationError::new(field, "must not be empty"));
            }
        }
        if !validate_email(self.email.trim()) {
            return Err(ValidationError::new("email", "is not a valid email address"));
        }
        Ok(())
    }
}

/// A registered learner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub name: String,
    pub email: String,
    pub year_of_study: String,
    pub gender: String,
    pub major: String,
    pub instructor: String,
    pub course: String,
    pub created_at: Timestamp,
}

impl UserProfile {
    /// Validates the form and builds a profile with surrounding whitespace trimmed.
    pub fn from_registration(
        user_id: String,
        form: Registration,
        created_at: Timestamp,
    ) -> Result<Self, ValidationError> {
        form.validate()?;
        Ok(Self {
            user_id,
            name: form.name.trim().to_owned(),
            email: form.email.trim().to_owned(),
            year_of_study: form.year_of_study.trim().to_owned(),
            gender: form.gender.trim().to_owned(),
            major: form.major.trim().to_owned(),
            instructor: form.instructor.trim().to_owned(),
            course: form.course.trim().to_owned(),
            created_at,
        })
    }
}

/// Who authored a persisted message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sender {
    User,
    Empa,
}

impl Sender {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sender::User => "user",
            Sender::Empa => "empa",
        }
    }

    pub fn role(&self) -> Role {
        match self {
            Sender::User => Role::User,
            Sender::Empa => Role::Assistant,
        }
    }
}

impl FromStr for Sender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "user" => Ok(Sender::User),
            "empa" => Ok(Sender::Empa),
            other => Err(format!("unknown sender `{other}`")),
        }
    }
}

/// Role of an entry in a provider context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One persisted utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub message_id: String,
    pub user_id: String,
    pub sender: Sender,
    pub content: String,
    pub timestamp: Timestamp,
    pub seq: u64,
    /// Set on reflections and the feedback that answers them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module_id: Option<ModuleId>,
}

/// The six curriculum modules, in the order learners unlock them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleId {
    ExploringInterpersonalCollaboration,
    MeetYourGuideEmpa,
    AnalyzingTeamInteractions,
    UnderstandingGlobalCompetence,
    EmpathyAsAStrategy,
    MakingTeamCollaborationWork,
}

impl ModuleId {
    pub const ALL: [ModuleId; 6] = [
        ModuleId::ExploringInterpersonalCollaboration,
        ModuleId::MeetYourGuideEmpa,
        ModuleId::AnalyzingTeamInteractions,
        ModuleId::UnderstandingGlobalCompetence,
        ModuleId::EmpathyAsAStrategy,
        ModuleId::MakingTeamCollaborationWork,
    ];

    /// 1-based position in the curriculum.
    pub fn order(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_order(order: u8) -> Option<Self> {
        Self::ALL.get(usize::from(order).checked_sub(1)?).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModuleId::ExploringInterpersonalCollaboration => "exploring_interpersonal_collaboration",
            ModuleId::MeetYourGuideEmpa => "meet_your_guide_empa",
            ModuleId::AnalyzingTeamInteractions => "analyzing_team_interactions",
            ModuleId::UnderstandingGlobalCompetence => "understanding_global_competence",
            ModuleId::EmpathyAsAStrategy => "empathy_as_a_strategy",
            ModuleId::MakingTeamCollaborationWork => "making_team_collaboration_work",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ModuleId::ExploringInterpersonalCollaboration => "Exploring Interpersonal Collaboration",
            ModuleId::MeetYourGuideEmpa => "Meet Your Guide – Empa",
            ModuleId::AnalyzingTeamInteractions => "Analyzing Team Interactions",
            ModuleId::UnderstandingGlobalCompetence => "Understanding Global Competence",
            ModuleId::EmpathyAsAStrategy => "Empathy as a Strategy",
            ModuleId::MakingTeamCollaborationWork => "Making Team Collaboration Work",
        }
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModuleId {
    type Err = String;

    /// Accepts either the snake_case name or the 1-based position.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(order) = s.parse::<u8>() {
            return Self::from_order(order).ok_or_else(|| format!("no module at position {order}"));
        }
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown module `{s}`"))
    }
}

/// Concept categories used by the drag-and-drop quizzes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CulturalDimension {
    PowerDistance,
    CommunicationStyle,
    IndividualismVsCollectivism,
    TimeOrientation,
}

impl CulturalDimension {
    pub const ALL: [CulturalDimension; 4] = [
        CulturalDimension::PowerDistance,
        CulturalDimension::CommunicationStyle,
        CulturalDimension::IndividualismVsCollectivism,
        CulturalDimension::TimeOrientation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CulturalDimension::PowerDistance => "power_distance",
            CulturalDimension::CommunicationStyle => "communication_style",
            CulturalDimension::IndividualismVsCollectivism => "individualism_vs_collectivism",
            CulturalDimension::TimeOrientation => "time_orientation",
        }
    }
}

/// Per-module completion state for one learner.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub completed: bool,
    pub completed_at: Option<Timestamp>,
}

impl CompletionRecord {
    pub fn completed_at(at: Timestamp) -> Self {
        Self {
            completed: true,
            completed_at: Some(at),
        }
    }
}

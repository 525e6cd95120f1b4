//! Startup configuration read from environment variables.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use empa_core::curriculum::{load_curriculum, Curriculum};
use empa_core::gateway::{
    FeedbackWindow, HttpProvider, HttpProviderConfig, MockProvider, PersonaPrompt, Provider,
    DEFAULT_MAX_WORDS, DEFAULT_RESPONSE_PATH, DEFAULT_TOKEN_BUDGET,
};
use empa_core::storage::open_store;
use empa_core::Mentor;
use thiserror::Error;

pub const DEFAULT_BIND_ADDR: &str = "0.0.0.0:8000";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("missing required environment variable {0}")]
    Missing(&'static str),
    #[error("invalid {var}: {reason}")]
    Invalid { var: &'static str, reason: String },
}

fn invalid(var: &'static str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        var,
        reason: reason.to_string(),
    }
}

/// Where replies come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSettings {
    MockEcho,
    MockFail,
    MockScript(PathBuf),
    Http {
        url: String,
        api_key: String,
        model: String,
        response_path: String,
        token_budget: usize,
    },
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind_addr: SocketAddr,
    pub allowed_origins: Vec<String>,
    pub database_url: String,
    pub provider: ProviderSettings,
    pub provider_timeout: Duration,
    pub persona_path: Option<PathBuf>,
    pub curriculum_path: Option<PathBuf>,
    pub feedback_max_words: usize,
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|key| std::env::var(key).ok())
    }

    /// Builds the configuration from any key lookup. Blank values count as unset.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let get = |key: &str| lookup(key).map(|v| v.trim().to_owned()).filter(|v| !v.is_empty());
        let require = |key: &'static str| get(key).ok_or(ConfigError::Missing(key));

        let bind_addr = get("BIND_ADDR")
            .unwrap_or_else(|| DEFAULT_BIND_ADDR.to_owned())
            .parse()
            .map_err(|e| invalid("BIND_ADDR", e))?;

        let allowed_origins: Vec<String> = require("ALLOWED_ORIGINS")?
            .split(',')
            .map(|o| o.trim().trim_end_matches('/').to_owned())
            .filter(|o| !o.is_empty())
            .collect();
        if allowed_origins.is_empty() {
            return Err(invalid("ALLOWED_ORIGINS", "no origins listed"));
        }
        for origin in &allowed_origins {
            if !(origin.starts_with("http://") || origin.starts_with("https://")) {
                return Err(invalid("ALLOWED_ORIGINS", format!("`{origin}` is not an http(s) origin")));
            }
        }

        let database_url = require("DATABASE_URL")?;

        let api_url = require("LLM_API_URL")?;
        let provider = match api_url.strip_prefix("mock:") {
            Some("echo") => ProviderSettings::MockEcho,
            Some("fail") => ProviderSettings::MockFail,
            Some(rest) => match rest.strip_prefix("script:") {
                Some(path) if !path.is_empty() => ProviderSettings::MockScript(path.into()),
                _ => return Err(invalid("LLM_API_URL", format!("unknown mock mode `{rest}`"))),
            },
            None => ProviderSettings::Http {
                url: api_url,
                api_key: require("LLM_API_KEY")?,
                model: require("LLM_MODEL")?,
                response_path: get("LLM_RESPONSE_PATH").unwrap_or_else(|| DEFAULT_RESPONSE_PATH.into()),
                token_budget: match get("LLM_TOKEN_BUDGET") {
                    Some(v) => v.parse().map_err(|e| invalid("LLM_TOKEN_BUDGET", e))?,
                    None => DEFAULT_TOKEN_BUDGET,
                },
            },
        };

        let provider_timeout = match get("LLM_TIMEOUT_SECS") {
            Some(v) => {
                let secs: f64 = v.parse().map_err(|e| invalid("LLM_TIMEOUT_SECS", e))?;
                if !(secs > 0.0 && secs.is_finite()) {
                    return Err(invalid("LLM_TIMEOUT_SECS", "must be a positive number"));
                }
                Duration::from_secs_f64(secs)
            }
            None => empa_core::gateway::DEFAULT_PROVIDER_TIMEOUT,
        };

        let feedback_max_words = match get("FEEDBACK_MAX_WORDS") {
            Some(v) => {
                let n: usize = v.parse().map_err(|e| invalid("FEEDBACK_MAX_WORDS", e))?;
                if n == 0 {
                    return Err(invalid("FEEDBACK_MAX_WORDS", "must be at least 1"));
                }
                n
            }
            None => DEFAULT_MAX_WORDS,
        };

        Ok(Self {
            bind_addr,
            allowed_origins,
            database_url,
            provider,
            provider_timeout,
            persona_path: get("PERSONA_PATH").map(PathBuf::from),
            curriculum_path: get("CURRICULUM_PATH").map(PathBuf::from),
            feedback_max_words,
        })
    }

    /// Opens the store, loads content files and builds the provider.
    pub fn build_mentor(&self) -> Result<Mentor, ConfigError> {
        let store = open_store(&self.database_url).map_err(|e| invalid("DATABASE_URL", e))?;

        let curriculum = match &self.curriculum_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| invalid("CURRICULUM_PATH", format!("{}: {e}", path.display())))?;
                load_curriculum(&text).map_err(|e| invalid("CURRICULUM_PATH", e))?
            }
            None => Curriculum::builtin(),
        };

        let persona = match &self.persona_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| invalid("PERSONA_PATH", format!("{}: {e}", path.display())))?;
                PersonaPrompt::new(text.trim()).map_err(|e| invalid("PERSONA_PATH", e))?
            }
            None => PersonaPrompt::default(),
        };

        let provider: Arc<dyn Provider> = match &self.provider {
            ProviderSettings::MockEcho => Arc::new(MockProvider::echo()),
            ProviderSettings::MockFail => Arc::new(MockProvider::fail()),
            ProviderSettings::MockScript(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| invalid("LLM_API_URL", format!("{}: {e}", path.display())))?;
                let replies: Vec<String> =
                    serde_json::from_str(&text).map_err(|e| invalid("LLM_API_URL", e))?;
                Arc::new(MockProvider::script(replies))
            }
            ProviderSettings::Http {
                url,
                api_key,
                model,
                response_path,
                token_budget,
            } => {
                let mut config = HttpProviderConfig::new(url, api_key, model);
                config.timeout = self.provider_timeout;
                config.response_path = response_path.clone();
                config.token_budget = *token_budget;
                Arc::new(HttpProvider::new(config).map_err(|e| invalid("LLM_API_URL", e))?)
            }
        };

        let window = FeedbackWindow::new(self.feedback_max_words).map_err(|e| invalid("FEEDBACK_MAX_WORDS", e))?;
        Ok(Mentor::new(store, provider, Arc::new(curriculum))
            .with_persona(persona)
            .with_window(window)
            .with_provider_timeout(self.provider_timeout))
    }
}

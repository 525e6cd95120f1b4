use std::time::Duration;

use async_trait::async_trait;
use serde::Serialize;
use serde_json::Value;

use super::{ContextEntry, ConversationContext, GatewayError, Provider, ProviderError, DEFAULT_PROVIDER_TIMEOUT};

/// Dot-separated path to the reply text in an OpenAI-style chat completion.
pub const DEFAULT_RESPONSE_PATH: &str = "choices.0.message.content";

pub const DEFAULT_TOKEN_BUDGET: usize = 4096;

#[derive(Debug, Clone)]
pub struct HttpProviderConfig {
    pub url: String,
    pub api_key: String,
    pub model: String,
    pub timeout: Duration,
    pub response_path: String,
    pub token_budget: usize,
}

impl HttpProviderConfig {
    pub fn new(url: impl Into<String>, api_key: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key: api_key.into(),
            model: model.into(),
            timeout: DEFAULT_PROVIDER_TIMEOUT,
            response_path: DEFAULT_RESPONSE_PATH.into(),
            token_budget: DEFAULT_TOKEN_BUDGET,
        }
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ContextEntry],
}

/// Chat-completion endpoint reached over HTTP with bearer-token auth.
#[derive(Debug, Clone)]
pub struct HttpProvider {
    client: reqwest::Client,
    config: HttpProviderConfig,
    path: Vec<String>,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Result<Self, GatewayError> {
        let path: Vec<String> = config.response_path.split('.').map(str::to_owned).collect();
        if path.iter().any(String::is_empty) {
            return Err(GatewayError::Config(format!(
                "invalid response path `{}`",
                config.response_path
            )));
        }
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self { client, config, path })
    }

    fn extract(&self, body: &Value) -> Result<String, ProviderError> {
        let mut node = body;
        for key in &self.path {
            node = match key.parse::<usize>() {
                Ok(i) => node.get(i),
                Err(_) => node.get(key.as_str()),
            }
            .ok_or_else(|| {
                ProviderError::Malformed(format!("missing `{}` in response", self.config.response_path))
            })?;
        }
        node.as_str()
            .map(str::to_owned)
            .ok_or_else(|| ProviderError::Malformed("reply content is not a string".into()))
    }
}

#[async_trait]
impl Provider for HttpProvider {
    async fn complete(&self, context: &ConversationContext) -> Result<String, ProviderError> {
        let mut context = context.clone();
        context.fit_to_budget(self.config.token_budget);
        let request = CompletionRequest {
            model: &self.config.model,
            messages: context.entries(),
        };
        let response = self
            .client
            .post(&self.config.url)
            .bearer_auth(&self.config.api_key)
            .json(&request)
            .send()
            .await
            .map_err(|e| {
                if e.is_timeout() {
                    ProviderError::Timeout(self.config.timeout)
                } else {
                    ProviderError::Transport(e.to_string())
                }
            })?;
        let status = response.status();
        let text = response
            .text()
            .await
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ProviderError::Status {
                status: status.as_u16(),
                body: text.chars().take(512).collect(),
            });
        }
        let body: Value = serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        self.extract(&body)
    }
}

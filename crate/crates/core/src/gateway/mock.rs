use std::sync::atomic::{AtomicUsize, Ordering};

use async_trait::async_trait;

use super::{ConversationContext, Provider, ProviderError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockMode {
    /// Reply is a fixed function of the last user message.
    Echo,
    /// Replies are played back in order, wrapping around at the end.
    Script(Vec<String>),
    /// Every call fails as an upstream error.
    Fail,
}

/// In-tree provider for offline runs and tests.
#[derive(Debug)]
pub struct MockProvider {
    mode: MockMode,
    cursor: AtomicUsize,
}

impl MockProvider {
    pub fn new(mode: MockMode) -> Self {
        Self {
            mode,
            cursor: AtomicUsize::new(0),
        }
    }

    pub fn echo() -> Self {
        Self::new(MockMode::Echo)
    }

    pub fn fail() -> Self {
        Self::new(MockMode::Fail)
    }

    pub fn script<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(MockMode::Script(replies.into_iter().map(Into::into).collect()))
    }

    pub fn mode(&self) -> &MockMode {
        &self.mode
    }

    /// Echo output for `message`.
    pub fn echo_reply(message: &str) -> String {
        format!("Empa heard: {}", message.trim())
    }
}

#[async_trait]
impl Provider for MockProvider {
    async fn complete(&self, context: &ConversationContext) -> Result<String, ProviderError> {
        match &self.mode {
            MockMode::Echo => {
                let last = context
                    .last_user_message()
                    .ok_or_else(|| ProviderError::Malformed("no user entry to echo".into()))?;
                Ok(Self::echo_reply(last))
            }
            MockMode::Script(replies) => {
                if replies.is_empty() {
                    return Err(ProviderError::Unavailable("mock script is empty".into()));
                }
                let i = self.cursor.fetch_add(1, Ordering::SeqCst) % replies.len();
                Ok(replies[i].clone())
            }
            MockMode::Fail => Err(ProviderError::Unavailable("mock provider in fail mode".into())),
        }
    }
}

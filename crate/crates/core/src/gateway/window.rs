//! Word budget applied to every mentor reply.

use serde::{Deserialize, Serialize};

use super::GatewayError;

pub const DEFAULT_MAX_WORDS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackWindow {
    max_words: usize,
}

impl FeedbackWindow {
    pub fn new(max_words: usize) -> Result<Self, GatewayError> {
        if max_words == 0 {
            return Err(GatewayError::Config("feedback window must allow at least one word".into()));
        }
        Ok(Self { max_words })
    }

    pub fn max_words(&self) -> usize {
        self.max_words
    }
}

impl Default for FeedbackWindow {
    fn default() -> Self {
        Self {
            max_words: DEFAULT_MAX_WORDS,
        }
    }
}

/// Number of maximal non-whitespace runs.
pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

fn ends_sentence(word: &str) -> bool {
    let core = word.trim_end_matches(['"', '\'', ')', ']', '”', '’']);
    core.ends_with(['.', '!', '?'])
}

/// Trims `raw` to at most `window.max_words()` words.
///
/// Compliant text is returned untouched. Otherwise the cut falls after the
/// last word ending a sentence within the budget; with no such word the first
/// `max_words` words are kept and a period appended. Original spacing inside
/// the kept prefix is preserved.
pub fn enforce_window(raw: &str, window: FeedbackWindow) -> String {
    let max = window.max_words;
    // (end byte offset, ends a sentence) for each of the first `max` words
    let mut words = Vec::with_capacity(max);
    let mut total = 0usize;
    let mut offset = 0usize;
    for word in raw.split_whitespace() {
        total += 1;
        if total > max {
            break;
        }
        let start = offset + raw[offset..].find(word).expect("word comes from raw");
        let end = start + word.len();
        words.push((end, ends_sentence(word)));
        offset = end;
    }
    if total <= max {
        return raw.to_owned();
    }
    match words.iter().rev().find(|(_, boundary)| *boundary) {
        Some(&(end, _)) => raw[..end].to_owned(),
        None => {
            let end = words.last().map_or(0, |&(end, _)| end);
            format!("{}.", &raw[..end])
        }
    }
}

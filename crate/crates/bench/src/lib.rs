//! Deterministic inputs shared by the benchmarks.

use empa_core::{ChatMessage, Sender, Timestamp, UserProfile};

/// A provider reply of `words` words with a sentence break every seven words.
pub fn reply(words: usize) -> String {
    (0..words)
        .map(|i| if i % 7 == 6 { format!("word{i}.") } else { format!("word{i}") })
        .collect::<Vec<_>>()
        .join(" ")
}

/// A stored history of `len` alternating messages, greeting first.
pub fn history(len: usize) -> Vec<ChatMessage> {
    (0..len)
        .map(|i| ChatMessage {
            message_id: format!("m{i}"),
            user_id: "bench".into(),
            sender: if i % 2 == 0 { Sender::Empa } else { Sender::User },
            content: reply(24),
            timestamp: Timestamp::now(),
            seq: i as u64 + 1,
            module_id: None,
        })
        .collect()
}

pub fn profile(user_id: &str, email: &str) -> UserProfile {
    UserProfile {
        user_id: user_id.into(),
        name: "Bench".into(),
        email: email.into(),
        year_of_study: "Senior".into(),
        gender: "Other".into(),
        major: "Mechanical Engineering".into(),
        instructor: "Dr. Kim".into(),
        course: "ME 200".into(),
        created_at: Timestamp::now(),
    }
}

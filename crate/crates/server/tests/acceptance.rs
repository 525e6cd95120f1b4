//! Acceptance suite. Runs each criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any of them failed.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::AssertUnwindSafe;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use common::*;
use empa_core::curriculum::{score_quiz, unlocked_modules, QuizAttempt, QuizDefinition};
use empa_core::gateway::{assemble_context, count_words, enforce_window, ContextEntry, MockProvider};
use empa_core::storage::{MemoryStore, SqliteStore, Store};
use empa_core::{ChatMessage, CompletionRecord, Curriculum, FeedbackWindow, ModuleId, Role, Sender, Timestamp};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(8)
        .enable_all()
        .build()
        .expect("runtime");

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("AC1 end-to-end session contract", Box::new(|| rt.block_on(end_to_end()))),
        ("AC2 context assembly laws", Box::new(context_assembly)),
        ("AC3 feedback window bound", Box::new(|| rt.block_on(feedback_window()))),
        ("AC4 progressive unlock", Box::new(progressive_unlock)),
        ("AC5 quiz scoring oracle", Box::new(quiz_scoring)),
        ("AC6 failure atomicity", Box::new(|| rt.block_on(failure_atomicity()))),
        ("AC7 durability across restart", Box::new(|| rt.block_on(durability()))),
        ("AC8 concurrent sessions", Box::new(|| rt.block_on(concurrency()))),
    ];

    let mut failed = 0;
    for (name, check) in &criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        let ms = started.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS  {name}  ({detail}; {ms} ms)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}  ({why}; {ms} ms)");
            }
        }
    }
    println!("{} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}

async fn end_to_end() -> Outcome {
    let started = Instant::now();
    let app = app(echo());
    let id = app.register("e2e@purdue.edu").await;
    let sent = ["Hello Empa", "How do teams decide?", "Thanks!"];
    for msg in sent {
        let r = app.post("/api/chatbot", json!({ "user_id": id, "message": msg })).await;
        ensure!(r.status == StatusCode::OK, "chat returned {}", r.status);
        ensure!(r.json["reply"]["content"] == MockProvider::echo_reply(msg), "unexpected reply {}", r.json);
    }
    let history = app.history(&id).await;
    let elapsed = started.elapsed();

    ensure!(history.len() == 7, "expected 7 messages, got {}", history.len());
    let senders: Vec<&str> = history.iter().map(|m| m["sender"].as_str().unwrap_or("")).collect();
    let expected = ["empa", "user", "empa", "user", "empa", "user", "empa"];
    ensure!(senders == expected, "sender order {senders:?}");
    for (i, msg) in sent.iter().enumerate() {
        ensure!(history[1 + 2 * i]["content"] == *msg, "user message {i} not stored verbatim");
    }
    let seqs: Vec<u64> = history.iter().filter_map(|m| m["seq"].as_u64()).collect();
    ensure!(seqs.len() == 7 && seqs.windows(2).all(|w| w[0] < w[1]), "seq not strictly increasing: {seqs:?}");
    let stamps: Vec<Timestamp> = history
        .iter()
        .filter_map(|m| m["timestamp"].as_str().and_then(|s| s.parse().ok()))
        .collect();
    ensure!(stamps.len() == 7 && stamps.windows(2).all(|w| w[0] <= w[1]), "timestamps out of order");
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("7 messages, seq {seqs:?}, {} ms", elapsed.as_millis()))
}

fn expected_role(sender: Sender) -> Role {
    match sender {
        Sender::User => Role::User,
        Sender::Empa => Role::Assistant,
    }
}

fn random_text(rng: &mut StdRng) -> String {
    let words = rng.random_range(1..=12);
    (0..words)
        .map(|_| {
            let len = rng.random_range(1..=8);
            (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn context_assembly() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x00c0_ffee);
    let system = ContextEntry::new(Role::System, "You are Empa, friendly, helpful, and knowledgeable.");
    let mut violations = Vec::new();
    let mut lengths = BTreeSet::new();
    for case in 0..1000 {
        let n: usize = rng.random_range(0..=100);
        lengths.insert(n);
        let history: Vec<ChatMessage> = (0..n)
            .map(|i| ChatMessage {
                message_id: format!("m{i}"),
                user_id: "u".into(),
                sender: if i % 2 == 0 { Sender::Empa } else { Sender::User },
                content: random_text(&mut rng),
                timestamp: Timestamp::now(),
                seq: i as u64 + 1,
                module_id: None,
            })
            .collect();
        let new_message = random_text(&mut rng);
        let ctx = match assemble_context(system.clone(), &history, &new_message) {
            Ok(ctx) => ctx,
            Err(e) => {
                violations.push(format!("case {case}: {e}"));
                continue;
            }
        };
        let e = ctx.entries();
        let ok = e.len() == n + 2
            && e[0] == system
            && e.iter().filter(|x| x.role == Role::System).count() == 1
            && e[n + 1].role == Role::User
            && e[n + 1].content == new_message
            && history
                .iter()
                .zip(&e[1..=n])
                .all(|(m, c)| c.role == expected_role(m.sender) && c.content == m.content);
        if !ok {
            violations.push(format!("case {case} (n={n})"));
        }
    }
    ensure!(violations.is_empty(), "{} violations, first: {}", violations.len(), violations[0]);
    ensure!(lengths.contains(&0) && lengths.contains(&100), "length range not covered");
    Ok(format!("1000 histories, {} distinct lengths, 0 violations", lengths.len()))
}

fn random_reply(rng: &mut StdRng) -> String {
    let words: usize = rng.random_range(0..=200);
    let mut out = String::new();
    for i in 0..words {
        if i > 0 {
            out.push_str(if rng.random_bool(0.1) { "\n" } else { " " });
        }
        let len = rng.random_range(1..=9);
        for _ in 0..len {
            out.push(rng.random_range(b'a'..=b'z') as char);
        }
        if rng.random_bool(0.12) {
            out.push_str([".", "!", "?", ".\"", "?)", ","][rng.random_range(0..6)]);
        }
    }
    out
}

async fn feedback_window() -> Outcome {
    let mut rng = StdRng::seed_from_u64(80);
    let samples: Vec<String> = (0..1000).map(|_| random_reply(&mut rng)).collect();
    let app = app(MockProvider::script(samples.clone()));
    let window = FeedbackWindow::default();
    let max = window.max_words();

    let mut truncated = 0;
    let mut empty = 0;
    let mut user = String::new();
    for (i, raw) in samples.iter().enumerate() {
        if i % 50 == 0 {
            user = app.register(&format!("window{i}@purdue.edu")).await;
        }
        let before = app.store.get_history(&user).map_err(|e| e.to_string())?.len();
        let r = app.post("/api/chatbot", json!({ "user_id": user, "message": format!("turn {i}") })).await;
        let history = app.store.get_history(&user).map_err(|e| e.to_string())?;
        if count_words(raw) == 0 {
            empty += 1;
            ensure!(r.status == StatusCode::BAD_GATEWAY, "sample {i}: empty output gave {}", r.status);
            ensure!(history.len() == before, "sample {i}: empty output persisted messages");
            continue;
        }
        ensure!(r.status == StatusCode::OK, "sample {i}: status {}", r.status);
        let stored = history.last().ok_or("no history")?;
        ensure!(stored.sender == Sender::Empa, "sample {i}: last message not from empa");
        let words = count_words(&stored.content);
        ensure!((1..=max).contains(&words), "sample {i}: stored reply has {words} words");
        let again = enforce_window(&stored.content, window);
        ensure!(again == stored.content, "sample {i}: window not idempotent");
        ensure!(r.json["reply"]["content"] == stored.content.as_str(), "sample {i}: response differs from stored");
        if count_words(raw) > max {
            truncated += 1;
        } else {
            ensure!(stored.content == raw.trim(), "sample {i}: in-budget reply was altered");
        }
    }
    Ok(format!("1000 outputs, {truncated} truncated, {empty} empty rejected, max {max} words"))
}

fn progress_of(done: u8) -> BTreeMap<ModuleId, CompletionRecord> {
    ModuleId::ALL
        .into_iter()
        .map(|m| {
            let rec = if done & (1 << (m.order() - 1)) != 0 {
                CompletionRecord::completed_at(Timestamp::now())
            } else {
                CompletionRecord::default()
            };
            (m, rec)
        })
        .collect()
}

fn orders(set: &BTreeSet<ModuleId>) -> Vec<u8> {
    set.iter().map(|m| m.order()).collect()
}

fn progressive_unlock() -> Outcome {
    // Brute force: module k is open when each of 1..k-1 is complete.
    let brute = |done: u8| -> Vec<u8> { (1..=6u8).filter(|k| (1..*k).all(|j| done & (1 << (j - 1)) != 0)).collect() };

    for done in 0u8..64 {
        let got = orders(&unlocked_modules(&progress_of(done)));
        ensure!(!got.is_empty() && got.iter().enumerate().all(|(i, k)| *k as usize == i + 1), "state {done:06b}: {got:?} is not a prefix");
        ensure!(got == brute(done), "state {done:06b}: got {got:?}, brute force {:?}", brute(done));
    }

    // Reachable states: start empty, complete only modules that are unlocked.
    let mut reachable = BTreeSet::from([0u8]);
    let mut frontier = vec![0u8];
    let mut transitions = 0;
    while let Some(done) = frontier.pop() {
        let before = unlocked_modules(&progress_of(done));
        for k in before.iter().map(|m| m.order()) {
            let bit = 1 << (k - 1);
            if done & bit != 0 {
                continue;
            }
            transitions += 1;
            let next = done | bit;
            let after = unlocked_modules(&progress_of(next));
            let added: Vec<u8> = orders(&after).into_iter().filter(|o| !orders(&before).contains(o)).collect();
            ensure!(added.iter().all(|o| *o == k + 1), "completing {k} from {done:06b} unlocked {added:?}");
            ensure!(before.is_subset(&after), "completing {k} from {done:06b} relocked a module");
            if reachable.insert(next) {
                frontier.push(next);
            }
        }
    }
    ensure!(reachable.len() == 7, "expected 7 reachable states, found {}", reachable.len());
    Ok(format!("64 states checked, {} reachable, {transitions} transitions", reachable.len()))
}

fn quiz_scoring() -> Outcome {
    let curriculum = Curriculum::builtin();
    let quiz: QuizDefinition = curriculum
        .module(ModuleId::UnderstandingGlobalCompetence)
        .quiz
        .clone()
        .ok_or("module 4 has no quiz")?;
    let key: BTreeMap<&str, &str> = BTreeMap::from([
        ("amara", "individualism_vs_collectivism"),
        ("diego", "time_orientation"),
        ("lukas", "communication_style"),
        ("mei", "power_distance"),
    ]);
    let shipped: BTreeMap<&str, &str> = quiz.answer_key.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    ensure!(shipped == key, "shipped answer key differs from the reference table");

    let characters: Vec<&str> = key.keys().copied().collect();
    let categories: Vec<&str> = quiz.categories.iter().map(String::as_str).collect();
    ensure!(characters.len() == 4 && categories.len() == 4, "quiz is not 4x4");

    let attempt = |choice: &[usize]| QuizAttempt {
        quiz_id: quiz.quiz_id.clone(),
        assignments: characters
            .iter()
            .zip(choice)
            .map(|(c, i)| (c.to_string(), categories[*i].to_string()))
            .collect(),
        submitted_at: Timestamp::now(),
    };
    let recount = |choice: &[usize]| characters.iter().zip(choice).filter(|(c, i)| key[*c] == categories[**i]).count();

    let mut maps = 0;
    for code in 0..256usize {
        let choice = [code & 3, (code >> 2) & 3, (code >> 4) & 3, (code >> 6) & 3];
        let result = score_quiz(&quiz, &attempt(&choice)).map_err(|e| e.to_string())?;
        let expected = recount(&choice);
        ensure!(result.correct_count == expected, "map {choice:?}: {} vs {expected}", result.correct_count);
        ensure!(result.total == 4 && result.passed == (expected == 4), "map {choice:?}: pass flag wrong");
        ensure!((result.score - expected as f64 / 4.0).abs() < 1e-12, "map {choice:?}: score {}", result.score);
        maps += 1;
    }

    let mut perms = Vec::new();
    permutations(&mut vec![0, 1, 2, 3], 0, &mut perms);
    ensure!(perms.len() == 24, "generated {} permutations", perms.len());
    let mut total = 0;
    let mut per_character = BTreeMap::<String, usize>::new();
    for p in &perms {
        let result = score_quiz(&quiz, &attempt(p)).map_err(|e| e.to_string())?;
        total += result.correct_count;
        for (c, ok) in result.correct {
            *per_character.entry(c).or_default() += usize::from(ok);
        }
    }
    ensure!(total == 4 * 6, "permutation total {total}, expected 24");
    ensure!(per_character.values().all(|n| *n == 6), "per-character counts {per_character:?}");
    Ok(format!("{maps} maps agree with recount; 24 permutations sum to {total}"))
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

async fn failure_atomicity() -> Outcome {
    let app = app(MockProvider::fail());
    let id = app.register("fail@purdue.edu").await;
    let before_history = app.get(&format!("/api/chat-history/{id}")).await.raw;
    let before_progress = app.get(&format!("/api/progress/{id}")).await.raw;
    for i in 0..100 {
        let r = app.post("/api/chatbot", json!({ "user_id": id, "message": format!("message {i}") })).await;
        ensure!(r.status == StatusCode::BAD_GATEWAY, "attempt {i}: status {}", r.status);
        ensure!(r.json["code"] == "upstream_error", "attempt {i}: body {}", r.json);
        ensure!(app.get(&format!("/api/chat-history/{id}")).await.raw == before_history, "history changed after attempt {i}");
    }
    for i in 0..10 {
        let r = app.post("/api/reflection/1", json!({ "user_id": id, "text": format!("reflection {i}") })).await;
        ensure!(r.status == StatusCode::BAD_GATEWAY, "reflection {i}: status {}", r.status);
    }
    ensure!(app.get(&format!("/api/chat-history/{id}")).await.raw == before_history, "history changed");
    ensure!(app.get(&format!("/api/progress/{id}")).await.raw == before_progress, "progress changed");
    ensure!(app.store.reflection_count(&id, ModuleId::ExploringInterpersonalCollaboration).map_err(|e| e.to_string())? == 0, "reflection recorded");
    Ok("100 chat and 10 reflection failures returned 502, history and progress unchanged".into())
}

struct Snapshot {
    profiles: Vec<Value>,
    histories: Vec<Vec<u8>>,
    progress: Vec<Vec<u8>>,
}

async fn snapshot(app: &TestApp, ids: &[String]) -> Result<Snapshot, String> {
    let mut s = Snapshot {
        profiles: vec![],
        histories: vec![],
        progress: vec![],
    };
    for id in ids {
        let profile = app.store.get_user(id).map_err(|e| e.to_string())?;
        s.profiles.push(serde_json::to_value(profile).map_err(|e| e.to_string())?);
        s.histories.push(app.get(&format!("/api/chat-history/{id}")).await.raw);
        s.progress.push(app.get(&format!("/api/progress/{id}")).await.raw);
    }
    Ok(s)
}

async fn durability() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("empa.db");
    let open = || -> Result<Arc<dyn Store>, String> { Ok(Arc::new(SqliteStore::open(&path).map_err(|e| e.to_string())?)) };

    let (ids, before) = {
        let app = app_with(echo(), open()?);
        let a = app.register("durable-a@purdue.edu").await;
        let b = app.register("durable-b@purdue.edu").await;
        for i in 0..3 {
            app.post("/api/chatbot", json!({ "user_id": a, "message": format!("a{i}") })).await;
        }
        app.post("/api/chatbot", json!({ "user_id": b, "message": "b0" })).await;
        let r = app.post("/api/reflection/1", json!({ "user_id": a, "text": "A reflection." })).await;
        ensure!(r.status == StatusCode::OK, "reflection failed: {}", r.json);
        app.post("/api/view/2", json!({ "user_id": a })).await;
        let ids = vec![a, b];
        let snap = snapshot(&app, &ids).await?;
        (ids, snap)
    };

    let app = app_with(echo(), open()?);
    let after = snapshot(&app, &ids).await?;
    ensure!(before.profiles == after.profiles, "profiles differ after reopen");
    ensure!(before.histories == after.histories, "histories differ after reopen");
    ensure!(before.progress == after.progress, "progress differs after reopen");
    let history = app.history(&ids[0]).await;
    ensure!(history.len() == 9, "expected 9 messages for user a, found {}", history.len());
    let r = app.post("/api/chatbot", json!({ "user_id": ids[0], "message": "after restart" })).await;
    ensure!(r.json["reply"]["seq"] == 11, "seq did not continue after restart: {}", r.json);
    Ok("2 users, 13 messages and progress identical after reopen".into())
}

async fn parallel_sessions(app: Arc<TestApp>, label: &str) -> Result<(), String> {
    let mut tasks = Vec::new();
    for s in 0..50 {
        let app = app.clone();
        let label = label.to_owned();
        tasks.push(tokio::spawn(async move {
            let id = app.register(&format!("{label}-{s}@purdue.edu")).await;
            for t in 0..3 {
                let msg = format!("session {s} turn {t}");
                let r = app.post("/api/chatbot", json!({ "user_id": id, "message": msg })).await;
                assert_eq!(r.status, StatusCode::OK);
            }
            (s, id)
        }));
    }
    let mut ids = HashSet::new();
    for task in tasks {
        let (s, id) = task.await.map_err(|e| e.to_string())?;
        ensure!(ids.insert(id.clone()), "duplicate user id");
        let history = app.history(&id).await;
        ensure!(history.len() == 7, "{label} session {s}: {} messages", history.len());
        for (i, m) in history.iter().enumerate().skip(1) {
            ensure!(m["user_id"] == id.as_str(), "{label} session {s}: foreign message");
            let t = (i - 1) / 2;
            let own = format!("session {s} turn {t}");
            let expected = if i % 2 == 1 { own.clone() } else { MockProvider::echo_reply(&own) };
            ensure!(m["content"] == expected.as_str(), "{label} session {s}: message {i} is {}", m["content"]);
        }
    }
    Ok(())
}

async fn racing_turns(app: Arc<TestApp>, label: &str) -> Result<(), String> {
    let id = app.register(&format!("{label}-racer@purdue.edu")).await;
    let tasks: Vec<_> = (0..10)
        .map(|i| {
            let app = app.clone();
            let id = id.clone();
            tokio::spawn(async move {
                app.post("/api/chatbot", json!({ "user_id": id, "message": format!("race {i}") }))
                    .await
                    .status
            })
        })
        .collect();
    for t in tasks {
        let status = t.await.map_err(|e| e.to_string())?;
        ensure!(status == StatusCode::OK, "{label}: racing turn returned {status}");
    }
    let history = app.history(&id).await;
    ensure!(history.len() == 21, "{label}: racing history has {} messages", history.len());
    let mut seen = BTreeSet::new();
    for pair in history[1..].chunks(2) {
        ensure!(pair[0]["sender"] == "user" && pair[1]["sender"] == "empa", "{label}: turns interleaved");
        let msg = pair[0]["content"].as_str().unwrap_or("");
        ensure!(pair[1]["content"] == MockProvider::echo_reply(msg).as_str(), "{label}: reply not paired with {msg}");
        seen.insert(msg.to_owned());
    }
    ensure!(seen.len() == 10, "{label}: lost turns");
    Ok(())
}

async fn concurrency() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sqlite: Arc<dyn Store> = Arc::new(SqliteStore::open(dir.path().join("c.db")).map_err(|e| e.to_string())?);
    let backends: [(&str, Arc<dyn Store>); 2] = [("memory", Arc::new(MemoryStore::new())), ("sqlite", sqlite)];
    for (label, store) in backends {
        let app = Arc::new(app_with(echo(), store));
        parallel_sessions(app.clone(), label).await?;
        racing_turns(app, label).await?;
    }
    Ok("50 parallel sessions isolated and 10 racing turns paired, on memory and sqlite".into())
}

//! HTTP surface. Handlers keep no state between requests; every call reads
//! what it needs from the shared store.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, Request, State};
use axum::http::{header, HeaderValue, Method};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use empa_core::{ChatMessage, Mentor, ModuleId, Registration};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::error::ApiError;

/// Largest accepted request body.
pub const MAX_BODY_BYTES: usize = 32 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub mentor: Arc<Mentor>,
}

impl AppState {
    pub fn new(mentor: Mentor) -> Self {
        Self {
            mentor: Arc::new(mentor),
        }
    }
}

pub fn router(state: AppState, allowed_origins: &[String]) -> Router {
    let origins: Vec<HeaderValue> = allowed_origins
        .iter()
        .filter_map(|o| HeaderValue::from_str(o).ok())
        .collect();
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::list(origins))
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE]);

    Router::new()
        .route("/api/submit", post(submit))
        .route("/api/chatbot", post(chatbot))
        .route("/api/chat-history/{user_id}", get(chat_history))
        .route("/api/progress/{user_id}", get(progress))
        .route("/api/quiz/{module_id}", post(quiz))
        .route("/api/reflection/{module_id}", post(reflection))
        .route("/api/view/{module_id}", post(view))
        .route("/api/curriculum", get(curriculum))
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .method_not_allowed_fallback(|| async { ApiError::not_found("no such endpoint for this method") })
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .layer(middleware::from_fn(log_request))
        .layer(cors)
        .with_state(state)
}

async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_owned();
    let started = Instant::now();
    let response = next.run(req).await;
    tracing::info!(
        %method,
        %path,
        status = response.status().as_u16(),
        latency_ms = started.elapsed().as_secs_f64() * 1000.0,
        "request"
    );
    response
}

fn parse_body<T: DeserializeOwned>(body: Result<Bytes, BytesRejection>) -> Result<T, ApiError> {
    let bytes = body.map_err(|e| {
        ApiError::bad_request(format!("could not read request body (limit {MAX_BODY_BYTES} bytes): {e}"))
    })?;
    serde_json::from_slice(&bytes).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => ApiError::validation("body", e.to_string()),
        _ => ApiError::bad_request(format!("malformed JSON: {e}")),
    })
}

fn required(field: &'static str, value: Option<String>) -> Result<String, ApiError> {
    match value {
        Some(v) if !v.trim().is_empty() => Ok(v),
        Some(_) => Err(ApiError::validation(field, "must not be empty")),
        None => Err(ApiError::validation(field, "is required")),
    }
}

fn module_param(raw: &str) -> Result<ModuleId, ApiError> {
    raw.parse().map_err(|e: String| ApiError::not_found(e))
}

#[derive(Deserialize)]
struct RegistrationBody {
    name: Option<String>,
    email: Option<String>,
    year_of_study: Option<String>,
    gender: Option<String>,
    major: Option<String>,
    instructor: Option<String>,
    course: Option<String>,
}

async fn submit(State(state): State<AppState>, body: Result<Bytes, BytesRejection>) -> Result<Json<Value>, ApiError> {
    let b: RegistrationBody = parse_body(body)?;
    let form = Registration {
        name: required("name", b.name)?,
        email: required("email", b.email)?,
        year_of_study: required("year_of_study", b.year_of_study)?,
        gender: required("gender", b.gender)?,
        major: required("major", b.major)?,
        instructor: required("instructor", b.instructor)?,
        course: required("course", b.course)?,
    };
    let registered = state.mentor.register(form)?;
    tracing::info!(user_id = %registered.profile.user_id, "registered");
    Ok(Json(json!({
        "user_id": registered.profile.user_id,
        "greeting": registered.greeting,
    })))
}

#[derive(Deserialize)]
struct ChatBody {
    user_id: Option<String>,
    message: Option<String>,
}

async fn chatbot(State(state): State<AppState>, body: Result<Bytes, BytesRejection>) -> Result<Json<Value>, ApiError> {
    let b: ChatBody = parse_body(body)?;
    let user_id = required("user_id", b.user_id)?;
    let message = required("message", b.message)?;
    let started = Instant::now();
    let result = state.mentor.chat(&user_id, &message).await;
    let latency_ms = started.elapsed().as_secs_f64() * 1000.0;
    match result {
        Ok(turn) => {
            tracing::info!(
                %user_id,
                latency_ms,
                provider_latency_ms = turn.provider_latency.as_secs_f64() * 1000.0,
                "chat turn"
            );
            Ok(Json(json!({ "reply": turn.reply })))
        }
        Err(err) => {
            tracing::warn!(%user_id, latency_ms, error = %err, "chat turn failed");
            Err(err.into())
        }
    }
}

async fn chat_history(State(state): State<AppState>, Path(user_id): Path<String>) -> Result<Json<Value>, ApiError> {
    let messages: Vec<ChatMessage> = state.mentor.history(&user_id)?;
    Ok(Json(json!({ "user_id": user_id, "messages": messages })))
}

async fn progress(State(state): State<AppState>, Path(user_id): Path<String>) -> Result<Json<Value>, ApiError> {
    let modules = state.mentor.progress(&user_id)?;
    Ok(Json(json!({ "user_id": user_id, "modules": modules })))
}

#[derive(Deserialize)]
struct QuizBody {
    user_id: Option<String>,
    quiz_id: Option<String>,
    assignments: Option<BTreeMap<String, String>>,
}

async fn quiz(
    State(state): State<AppState>,
    Path(module_id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<Value>, ApiError> {
    let module = module_param(&module_id)?;
    let b: QuizBody = parse_body(body)?;
    let user_id = required("user_id", b.user_id)?;
    let quiz_id = required("quiz_id", b.quiz_id)?;
    let assignments = b
        .assignments
        .ok_or_else(|| ApiError::validation("assignments", "is required"))?;
    let outcome = state.mentor.submit_quiz(&user_id, module, &quiz_id, assignments)?;
    tracing::info!(%user_id, module = %module, score = outcome.result.score, "quiz attempt");
    Ok(Json(serde_json::to_value(outcome).map_err(|e| ApiError::internal(e.to_string()))?))
}

#[derive(Deserialize)]
struct ReflectionBody {
    user_id: Option<String>,
    text: Option<String>,
}

async fn reflection(
    State(state): State<AppState>,
    Path(module_id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<Value>, ApiError> {
    let module = module_param(&module_id)?;
    let b: ReflectionBody = parse_body(body)?;
    let user_id = required("user_id", b.user_id)?;
    let text = required("text", b.text)?;
    let outcome = state.mentor.submit_reflection(&user_id, module, &text).await?;
    tracing::info!(%user_id, module = %module, "reflection");
    Ok(Json(json!({
        "feedback": outcome.feedback,
        "reflection": outcome.reflection,
        "module_completed": outcome.module_completed,
    })))
}

#[derive(Deserialize)]
struct ViewBody {
    user_id: Option<String>,
}

async fn view(
    State(state): State<AppState>,
    Path(module_id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<Value>, ApiError> {
    let module = module_param(&module_id)?;
    let b: ViewBody = parse_body(body)?;
    let user_id = required("user_id", b.user_id)?;
    let status = state.mentor.acknowledge_view(&user_id, module)?;
    Ok(Json(json!({ "module": status })))
}

/// Module content for the client, with quiz answer keys removed.
async fn curriculum(State(state): State<AppState>) -> impl IntoResponse {
    let c = state.mentor.curriculum();
    let modules: Vec<Value> = c
        .modules()
        .iter()
        .map(|m| {
            let quiz = m.quiz.as_ref().map(|q| {
                json!({ "quiz_id": q.quiz_id, "categories": q.categories, "items": q.items })
            });
            json!({
                "id": m.id,
                "order": m.id.order(),
                "title": m.title,
                "media": m.media_refs,
                "prompts": m.reflection_prompts,
                "quiz": quiz,
                "completion_rule": m.completion_rule,
            })
        })
        .collect();
    Json(json!({ "version": c.version, "modules": modules }))
}

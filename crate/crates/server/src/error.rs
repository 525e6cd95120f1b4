use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use empa_core::ServiceError;
use serde::Serialize;

/// JSON error body returned by every failing endpoint.
///
/// Statuses are limited to 400, 403, 404, 409, 422, 500 and 502; 502 is only
/// ever produced by a provider failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(rename = "status")]
    pub http_status: u16,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            http_status: status.as_u16(),
            code,
            message: message.into(),
            field: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_request", message)
    }

    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        let field = field.into();
        let mut err = Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "validation_error",
            format!("{field}: {}", message.into()),
        );
        err.field = Some(field);
        err
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", message)
    }

    pub fn status(&self) -> StatusCode {
        StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
    }
}

impl From<ServiceError> for ApiError {
    fn from(err: ServiceError) -> Self {
        match err {
            ServiceError::Validation { field, message } => ApiError::validation(field, message),
            ServiceError::NotFound(m) => ApiError::not_found(m),
            ServiceError::Conflict(m) => ApiError::new(StatusCode::CONFLICT, "conflict", m),
            ServiceError::Forbidden(m) => ApiError::new(StatusCode::FORBIDDEN, "module_locked", m),
            ServiceError::Upstream(m) => ApiError::new(
                StatusCode::BAD_GATEWAY,
                "upstream_error",
                format!("Empa is unavailable right now, please try again ({m})"),
            ),
            ServiceError::Storage(m) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", m)
            }
            ServiceError::Internal(m) => ApiError::internal(m),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}

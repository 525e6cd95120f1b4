//! HTTP API for the Empa mentoring service.

pub mod config;
pub mod error;
pub mod routes;

pub use config::{ConfigError, ServiceConfig};
pub use error::ApiError;
pub use routes::{router, AppState, MAX_BODY_BYTES};

#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use empa_core::gateway::{MockProvider, Provider};
use empa_core::storage::{MemoryStore, Store};
use empa_core::{Curriculum, Mentor};
use empa_server::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const ORIGIN: &str = "http://localhost:5173";

pub struct TestApp {
    pub router: Router,
    pub store: Arc<dyn Store>,
}

pub fn app_with(provider: impl Provider + 'static, store: Arc<dyn Store>) -> TestApp {
    let mentor = Mentor::new(store.clone(), Arc::new(provider), Arc::new(Curriculum::builtin()));
    TestApp {
        router: router(AppState::new(mentor), &[ORIGIN.to_owned()]),
        store,
    }
}

pub fn app(provider: impl Provider + 'static) -> TestApp {
    app_with(provider, Arc::new(MemoryStore::new()))
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub raw: Vec<u8>,
    pub json: Value,
}

impl TestApp {
    pub async fn send(&self, method: Method, uri: &str, body: Option<Body>, origin: Option<&str>) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(origin) = origin {
            req = req.header("origin", origin);
        }
        let body = match body {
            Some(b) => {
                req = req.header("content-type", "application/json");
                b
            }
            None => Body::empty(),
        };
        let res = self.router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = res.status();
        let headers = res.headers().clone();
        let raw = res.into_body().collect().await.unwrap().to_bytes().to_vec();
        let json = serde_json::from_slice(&raw).unwrap_or(Value::Null);
        Reply {
            status,
            headers,
            raw,
            json,
        }
    }

    pub async fn post(&self, uri: &str, body: Value) -> Reply {
        self.send(Method::POST, uri, Some(Body::from(body.to_string())), None)
            .await
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.send(Method::GET, uri, None, None).await
    }

    pub async fn register(&self, email: &str) -> String {
        let r = self.post("/api/submit", registration(email)).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.json);
        r.json["user_id"].as_str().unwrap().to_owned()
    }

    pub async fn history(&self, user_id: &str) -> Vec<Value> {
        let r = self.get(&format!("/api/chat-history/{user_id}")).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.json);
        r.json["messages"].as_array().unwrap().clone()
    }
}

pub fn registration(email: &str) -> Value {
    json!({
        "name": "Ada",
        "email": email,
        "year_of_study": "Junior",
        "gender": "Female",
        "major": "Computer Science",
        "instructor": "Dr. Lee",
        "course": "CS 390"
    })
}

pub fn echo() -> MockProvider {
    MockProvider::echo()
}

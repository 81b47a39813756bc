#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use serde_json::{json, Value as Json};
use tower::ServiceExt;

use recourse::workspace::Workspace;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").canonicalize().unwrap()
}

pub fn adult() -> Arc<Workspace> {
    Arc::new(Workspace::load_dir(&fixtures().join("adult")).unwrap())
}

pub fn individual() -> Json {
    let text = std::fs::read_to_string(fixtures().join("adult/instance.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn locked() -> Json {
    json!({"capital_gain": "immutable", "education_num": "immutable"})
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: String,
    pub body: String,
}

impl Reply {
    pub fn json(&self) -> Json {
        serde_json::from_str(&self.body).unwrap()
    }
}

pub async fn call(app: axum::Router, method: &str, path: &str, body: Option<String>) -> Reply {
    let req = Request::builder()
        .method(method)
        .uri(path)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let content_type = resp.headers().get("content-type").map(|v| v.to_str().unwrap().to_string()).unwrap_or_default();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    Reply { status, content_type, body: String::from_utf8(bytes.to_vec()).unwrap() }
}

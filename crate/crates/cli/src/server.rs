//! JSON-over-HTTP service over one shared, immutable workspace.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde_json::Value as Json;
use tokio::sync::Semaphore;

use recourse::api::{self, ApiError};
use recourse::workspace::Workspace;

#[derive(Clone)]
struct AppState {
    ws: Arc<Workspace>,
    /// Bounds evaluations running at once; requests beyond it queue.
    permits: Arc<Semaphore>,
}

/// Default evaluation cap: one per CPU.
pub fn default_concurrency() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn json_response(status: StatusCode, payload: &Json) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], api::render(payload)).into_response()
}

fn outcome(r: Result<Json, ApiError>) -> Response {
    match r {
        Ok(v) => json_response(StatusCode::OK, &v),
        Err(e) => {
            let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::BAD_REQUEST);
            json_response(status, &e.to_json())
        }
    }
}

/// Runs one evaluation off the async workers, once a permit is free.
async fn evaluate<F>(state: AppState, f: F) -> Response
where
    F: FnOnce(&Workspace) -> Result<Json, ApiError> + Send + 'static,
{
    let Ok(_permit) = state.permits.clone().acquire_owned().await else {
        return json_response(
            StatusCode::SERVICE_UNAVAILABLE,
            &serde_json::json!({"error": {"code": "shutting-down", "message": "service is shutting down"}}),
        );
    };
    let ws = state.ws.clone();
    match tokio::task::spawn_blocking(move || f(&ws)).await {
        Ok(r) => outcome(r),
        Err(e) => json_response(
            StatusCode::INTERNAL_SERVER_ERROR,
            &serde_json::json!({"error": {"code": "internal", "message": e.to_string()}}),
        ),
    }
}

async fn health() -> Response {
    json_response(StatusCode::OK, &api::health())
}

async fn schema(State(state): State<AppState>) -> Response {
    json_response(StatusCode::OK, &api::schema(&state.ws))
}

async fn classify(State(state): State<AppState>, body: Bytes) -> Response {
    match api::parse_request::<api::ClassifyRequest>(&body) {
        Ok(req) => evaluate(state, move |ws| api::classify(ws, &req)).await,
        Err(e) => outcome(Err(e)),
    }
}

async fn explain(State(state): State<AppState>, body: Bytes) -> Response {
    match api::parse_request::<api::ExplainRequest>(&body) {
        Ok(req) => evaluate(state, move |ws| api::explain(ws, &req, false)).await,
        Err(e) => outcome(Err(e)),
    }
}

async fn interpolant(State(state): State<AppState>, body: Bytes) -> Response {
    match api::parse_request::<api::InterpolantRequest>(&body) {
        Ok(req) => evaluate(state, move |ws| api::interpolant(ws, &req)).await,
        Err(e) => outcome(Err(e)),
    }
}

async fn not_found() -> Response {
    json_response(
        StatusCode::NOT_FOUND,
        &serde_json::json!({"error": {"code": "not-found", "message": "no such endpoint"}}),
    )
}

async fn wrong_method() -> Response {
    json_response(
        StatusCode::METHOD_NOT_ALLOWED,
        &serde_json::json!({"error": {"code": "method-not-allowed", "message": "method not allowed for this endpoint"}}),
    )
}

pub fn router(ws: Arc<Workspace>, max_concurrent: usize) -> Router {
    let state = AppState { ws, permits: Arc::new(Semaphore::new(max_concurrent.max(1))) };
    Router::new()
        .route("/api/health", get(health))
        .route("/api/schema", get(schema))
        .route("/api/classify", post(classify))
        .route("/api/explain", post(explain))
        .route("/api/interpolant", post(interpolant))
        .fallback(not_found)
        .method_not_allowed_fallback(wrong_method)
        .with_state(state)
}

/// Binds and serves until interrupted.
pub async fn serve(ws: Arc<Workspace>, addr: SocketAddr, max_concurrent: usize) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("serving {} on http://{}", ws.name, listener.local_addr()?);
    axum::serve(listener, router(ws, max_concurrent))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

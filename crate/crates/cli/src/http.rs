//! JSON over HTTP for interactive sessions.
//!
//! | method | path                  | body                                 |
//! |--------|-----------------------|--------------------------------------|
//! | POST   | `/sessions`           |                                      |
//! | POST   | `/sessions/{id}/ask`  | `{"utterance", "k"?, "lambda"?}`     |
//! | GET    | `/sessions/{id}`      |                                      |
//! | DELETE | `/sessions/{id}`      |                                      |
//! | GET    | `/healthz`            |                                      |
//!
//! Failures are `{"error": message}`: 400 for bad input, 404 for an unknown
//! session or route.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use convsearch::service::{AskResponse, SessionState, SessionStore};
use convsearch::Error;
use serde::Deserialize;
use serde_json::json;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Validation(_) | Error::EmptyQuery | Error::InvalidParam(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}", self.message);
        }
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AskRequest {
    pub utterance: String,
    pub k: Option<usize>,
    pub lambda: Option<f64>,
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/ask", post(ask))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "no such route") })
        .with_state(store)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn create_session(State(store): State<Arc<SessionStore>>) -> Result<impl IntoResponse, ApiError> {
    let id = store.create_session()?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

async fn ask(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Result<Json<AskRequest>, JsonRejection>,
) -> Result<Json<AskResponse>, ApiError> {
    let Json(req) = body?;
    // Retrieval is CPU-bound; keep it off the async workers.
    let response = tokio::task::spawn_blocking(move || store.ask(&id, &req.utterance, req.k, req.lambda))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(response))
}

async fn get_session(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Result<Json<SessionState>, ApiError> {
    Ok(Json(store.get_history(&id)?))
}

async fn delete_session(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    store.delete_session(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

pub async fn serve(store: Arc<SessionStore>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

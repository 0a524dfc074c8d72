//! HTTP/JSON session service for the two-phase disambiguation protocol.
//!
//! ```text
//! POST /sessions                          {program, data_path?}
//! GET  /sessions/{id}
//! POST /sessions/{id}/resolutions         {ambiguity_id, choice, revision?}
//! POST /sessions/{id}/statistical-choices {covariates?, interactions?, family?, link?}
//! GET  /sessions/{id}/artifacts
//! ```

mod error;
mod store;

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use cmc_core::derivation::StatisticalChoices;
use cmc_core::disambiguation::Resolution;
use cmc_core::graph::DEFAULT_MAX_CYCLE_NODES;
use cmc_core::session::{Session, SessionOptions};

pub use error::ApiError;
pub use store::{Snapshot, Store};

/// Programs larger than this are rejected with 413.
pub const MAX_PROGRAM_BYTES: usize = 1 << 20;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub max_cycle_nodes: usize,
}

impl AppState {
    pub fn new(store: Store) -> Self {
        AppState { store: Arc::new(store), max_cycle_nodes: DEFAULT_MAX_CYCLE_NODES }
    }
}

#[derive(Debug, Deserialize)]
struct CreateRequest {
    program: String,
    #[serde(default)]
    data_path: Option<String>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/resolutions", post(post_resolution))
        .route("/sessions/{id}/statistical-choices", post(post_statistical_choices))
        .route("/sessions/{id}/artifacts", get(get_artifacts))
        .layer(DefaultBodyLimit::max(4 * MAX_PROGRAM_BYTES))
        .with_state(state)
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn summary_json(id: &str, session: &Session) -> Value {
    let mut v = serde_json::to_value(session.summary()).expect("summary serializes");
    v["id"] = Value::String(id.to_string());
    v
}

fn storage_error(e: std::io::Error) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "StorageFailed", e.to_string())
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: CreateRequest = parse_body(&body)?;
    if req.program.len() > MAX_PROGRAM_BYTES {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "ProgramTooLarge",
            format!("programs are limited to {MAX_PROGRAM_BYTES} bytes"),
        ));
    }
    let options = SessionOptions { data_path: req.data_path, max_cycle_nodes: state.max_cycle_nodes };
    let program = req.program;
    let (program, session) = tokio::task::spawn_blocking(move || Session::create(&program, options).map(|s| (program, s)))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))??;
    let body = {
        let id = state.store.insert(program, session.clone()).await.map_err(storage_error)?;
        summary_json(&id, &session)
    };
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let (_, handle) = state.store.get(&id).await.ok_or_else(|| ApiError::unknown_session(&id))?;
    let session = handle.lock().await;
    Ok(Json(summary_json(&id, &session)))
}

async fn post_resolution(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let (program, handle) = state.store.get(&id).await.ok_or_else(|| ApiError::unknown_session(&id))?;
    let resolution: Resolution = parse_body(&body)?;
    let mut session = handle.lock().await;
    session.resolve(&resolution)?;
    state.store.persist(&id, &program, &session).map_err(storage_error)?;
    Ok(Json(summary_json(&id, &session)))
}

async fn post_statistical_choices(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let (program, handle) = state.store.get(&id).await.ok_or_else(|| ApiError::unknown_session(&id))?;
    let choices: StatisticalChoices = parse_body(&body)?;
    let mut session = handle.lock().await;
    session.choose(&choices)?;
    state.store.persist(&id, &program, &session).map_err(storage_error)?;
    Ok(Json(summary_json(&id, &session)))
}

async fn get_artifacts(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let (_, handle) = state.store.get(&id).await.ok_or_else(|| ApiError::unknown_session(&id))?;
    let session = handle.lock().await;
    let artifacts = session.artifacts()?;
    Ok(Json(serde_json::to_value(artifacts).expect("artifacts serialize")))
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

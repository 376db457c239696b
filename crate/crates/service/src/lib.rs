//! HTTP API over a VAX artifact set.
//!
//! | route                 | method | purpose                                   |
//! |-----------------------|--------|-------------------------------------------|
//! | `/api/meta`           | GET    | dataset summary, variables, manifest      |
//! | `/api/patterns`       | GET    | filtered and ordered matrix rows          |
//! | `/api/map`            | GET    | similarity map at a grid `lambda`         |
//! | `/api/selection`      | POST   | patterns supporting selected instances    |
//! | `/api/schema`         | GET    | JSON schemas of the responses above       |
//!
//! The session is loaded once and never mutated, so handlers share it
//! without locking. Until it is loaded every data route answers 503.

pub mod schema;
pub mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use tower_http::cors::CorsLayer;
use vax_core::explain::RowOrder;
use vax_core::pipeline::Artifacts;
use vax_core::VaxError;

pub use session::{PatternQuery, SelectionRequest, Session};

pub type SharedSession = Arc<OnceLock<Session>>;

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

#[derive(Debug)]
pub enum ApiError {
    NotLoaded,
    BadRequest(String),
    NotFound(String),
    Internal(String),
}

impl From<VaxError> for ApiError {
    fn from(e: VaxError) -> Self {
        match e.root() {
            VaxError::Inconsistent(_) | VaxError::Io { .. } | VaxError::Artifact { .. } => {
                ApiError::Internal(e.to_string())
            }
            _ => ApiError::BadRequest(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error) = match self {
            ApiError::NotLoaded => (StatusCode::SERVICE_UNAVAILABLE, "session is not loaded".to_string()),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(ErrorBody { error })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn session(state: &SharedSession) -> Result<&Session, ApiError> {
    state.get().ok_or(ApiError::NotLoaded)
}

pub fn router(state: SharedSession) -> Router {
    Router::new()
        .route("/api/meta", get(meta))
        .route("/api/patterns", get(patterns))
        .route("/api/map", get(map))
        .route("/api/selection", post(selection))
        .route("/api/schema", get(schemas))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

async fn meta(State(state): State<SharedSession>) -> ApiResult<session::Meta> {
    Ok(Json(session(&state)?.meta()))
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn number(key: &str, value: &str) -> Result<f64, ApiError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ApiError::BadRequest(format!("`{key}` must be a number, got `{value}`")))
}

/// Parses the query string of `/api/patterns`. Unknown keys are rejected.
pub fn parse_pattern_query(params: &HashMap<String, String>) -> Result<PatternQuery, ApiError> {
    let mut q = PatternQuery::default();
    for (key, value) in params {
        match key.as_str() {
            "classes" => q.classes = Some(list(value)),
            "instances" => q.instances = Some(list(value)),
            "min_support" => q.min_support = Some(number(key, value)?),
            "coverage_target" => q.coverage_target = Some(number(key, value)?),
            "order" => q.order = value.parse::<RowOrder>().map_err(|e| ApiError::BadRequest(e.to_string()))?,
            other => return Err(ApiError::BadRequest(format!("unknown parameter `{other}`"))),
        }
    }
    Ok(q)
}

async fn patterns(
    State(state): State<SharedSession>,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult<session::PatternsResponse> {
    let s = session(&state)?;
    let query = parse_pattern_query(&params)?;
    Ok(Json(s.patterns(&query)?))
}

async fn map(State(state): State<SharedSession>, Query(params): Query<HashMap<String, String>>) -> ApiResult<session::MapResponse> {
    let s = session(&state)?;
    if let Some(other) = params.keys().find(|k| k.as_str() != "lambda") {
        return Err(ApiError::BadRequest(format!("unknown parameter `{other}`")));
    }
    let lambda = match params.get("lambda").map(String::as_str) {
        None | Some("auto") => None,
        Some(v) => Some(number("lambda", v)?),
    };
    if s.artifacts.embeddings.is_none() {
        return Err(ApiError::NotFound("this artifact set has no embeddings".into()));
    }
    Ok(Json(s.map(lambda)?))
}

async fn selection(
    State(state): State<SharedSession>,
    body: Result<Json<SelectionRequest>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<session::SelectionResponse> {
    let s = session(&state)?;
    let Json(request) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    Ok(Json(s.selection(&request)?))
}

async fn schemas() -> Json<serde_json::Value> {
    Json(schema::all())
}

/// Loads `artifacts_dir` into `state`.
pub fn load(state: &SharedSession, artifacts_dir: &Path) -> vax_core::Result<()> {
    let session = Session::new(Artifacts::load(artifacts_dir)?)?;
    if state.set(session).is_err() {
        log::warn!("session already loaded; keeping the first one");
    }
    Ok(())
}

/// Binds `addr`, loads the artifacts, and serves until interrupted.
pub async fn serve(artifacts_dir: &Path, addr: SocketAddr) -> std::io::Result<()> {
    let state: SharedSession = Arc::new(OnceLock::new());
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let app = router(state.clone());
    let dir = artifacts_dir.to_path_buf();
    let loader = state.clone();
    tokio::task::spawn_blocking(move || {
        if let Err(e) = load(&loader, &dir) {
            log::error!("failed to load {}: {e}", dir.display());
        } else {
            log::info!("loaded {}", dir.display());
        }
    });
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

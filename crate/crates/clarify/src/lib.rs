//! HTTP front end of the clarification engine.
//!
//! Every question posted to `/v1/session` is clarified: there is no upstream
//! ambiguity classifier, so the metrics cover all sessions, not only the
//! ambiguous ones.

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clarify_core::service::{Engine, Metrics, Resolution, ServiceError, Session, SessionStatus};
use clarify_core::{IntentId, LabelId};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Shared handler state; `engine` is `None` until a model is loaded.
#[derive(Clone, Default)]
pub struct AppState {
    pub engine: Option<Arc<Engine>>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>) -> Self {
        AppState { engine: Some(engine) }
    }

    fn engine(&self) -> Result<&Engine, ApiError> {
        self.engine.as_deref().ok_or(ApiError(ServiceError::NotInitialized))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartRequest {
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelView {
    pub id: LabelId,
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartResponse {
    pub session_id: String,
    pub labels: Vec<LabelView>,
    pub none_option: bool,
}

/// Exactly one of `label_id` or `none: true`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LabelRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_id: Option<LabelId>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub none: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentView {
    pub id: IntentId,
    pub text: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelResponse {
    pub intents: Vec<IntentView>,
}

/// Exactly one of `intent_id` or `transfer: true`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ResolveRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent_id: Option<IntentId>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub transfer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolveResponse {
    pub status: SessionStatus,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            ServiceError::EmptyQuery
            | ServiceError::LabelNotShown(_)
            | ServiceError::IntentNotShown(_)
            | ServiceError::Config(_) => StatusCode::BAD_REQUEST,
            ServiceError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ServiceError::InvalidTransition { .. } => StatusCode::CONFLICT,
            ServiceError::NotInitialized => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Io { .. } | ServiceError::Log { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(ErrorBody { error: self.0.to_string() })).into_response()
    }
}

fn bad_request(msg: &str) -> ApiError {
    ApiError(ServiceError::Config(msg.to_string()))
}

async fn start(State(state): State<AppState>, Json(req): Json<StartRequest>) -> Result<Json<StartResponse>, ApiError> {
    let engine = state.engine()?;
    let started = engine.start_session(&req.query)?;
    let inv = engine.inventory();
    Ok(Json(StartResponse {
        session_id: started.session_id,
        labels: started
            .labels
            .into_iter()
            .map(|id| LabelView {
                id,
                phrase: inv.phrase(id).to_string(),
            })
            .collect(),
        none_option: true,
    }))
}

async fn select(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<LabelRequest>,
) -> Result<Json<LabelResponse>, ApiError> {
    let engine = state.engine()?;
    let choice = match (req.label_id, req.none) {
        (Some(x), false) => Some(x),
        (None, true) => None,
        _ => return Err(bad_request("send exactly one of label_id or none: true")),
    };
    let found = engine.select_label(&id, choice)?;
    let inv = engine.inventory();
    let intents = found
        .hits
        .iter()
        .filter_map(|h| inv.intent(h.id))
        .map(|i| IntentView {
            id: i.id,
            text: i.text.clone(),
            answer: i.answer.clone(),
        })
        .collect();
    Ok(Json(LabelResponse { intents }))
}

async fn resolve(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<ResolveRequest>,
) -> Result<Json<ResolveResponse>, ApiError> {
    let engine = state.engine()?;
    let outcome = match (req.intent_id, req.transfer) {
        (Some(s), false) => Resolution::Intent(s),
        (None, true) => Resolution::Transfer,
        _ => return Err(bad_request("send exactly one of intent_id or transfer: true")),
    };
    let closed = engine.resolve(&id, outcome)?;
    Ok(Json(ResolveResponse { status: closed.status }))
}

/// Counters over every session the service has handled.
async fn metrics(State(state): State<AppState>) -> Result<Json<Metrics>, ApiError> {
    Ok(Json(state.engine()?.metrics()))
}

async fn transcript(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Session>, ApiError> {
    Ok(Json(state.engine()?.session(&id)?))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/session", post(start))
        .route("/v1/session/{id}", get(transcript))
        .route("/v1/session/{id}/label", post(select))
        .route("/v1/session/{id}/resolve", post(resolve))
        .route("/v1/metrics", get(metrics))
        .with_state(state)
}

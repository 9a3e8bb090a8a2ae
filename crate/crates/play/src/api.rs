//! HTTP+JSON routes over a [`SessionStore`].
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/sessions` | [`CreateRequest`] |
//! | GET | `/sessions/{id}/offer` | |
//! | POST | `/sessions/{id}/decision` | `{"accept": bool, "token": str}` |
//! | POST | `/sessions/{id}/finish` | |
//! | GET | `/sessions/{id}/audit` | |
//! | GET | `/sessions/{id}/history` | |
//!
//! Errors come back as `{"error": {"code": ..., "message": ...}}`.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::PlayError;
use crate::session::CreateRequest;
use crate::store::SessionStore;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub accept: bool,
    #[serde(default)]
    pub token: Option<String>,
}

impl IntoResponse for PlayError {
    fn into_response(self) -> Response {
        let status =
            StatusCode::from_u16(self.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = json!({"error": {"code": self.code(), "message": self.to_string()}});
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, PlayError>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, PlayError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| PlayError::InvalidRequest(e.body_text()))
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/offer", get(offer))
        .route("/sessions/{id}/decision", post(decision))
        .route("/sessions/{id}/finish", post(finish))
        .route("/sessions/{id}/audit", get(audit))
        .route("/sessions/{id}/history", get(history))
        .with_state(store)
}

async fn create(
    State(store): State<Arc<SessionStore>>,
    payload: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<crate::session::CreatedView>), PlayError> {
    let view = store.create(body(payload)?)?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn offer(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> ApiResult<crate::session::OfferResponse> {
    store.offer(&id).map(Json)
}

async fn decision(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    payload: Result<Json<DecisionRequest>, JsonRejection>,
) -> ApiResult<crate::session::DecisionOutcome> {
    let req = body(payload)?;
    store.decide(&id, req.accept, req.token.as_deref()).map(Json)
}

async fn finish(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> ApiResult<crate::session::FinishView> {
    store.finish(&id).map(Json)
}

async fn audit(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> ApiResult<crate::session::AuditReport> {
    store.audit(&id).map(Json)
}

async fn history(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> ApiResult<crate::session::HistoryView> {
    store.history(&id).map(Json)
}

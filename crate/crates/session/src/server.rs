//! HTTP/JSON routes over [`Service`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use tokio::net::TcpListener;

use crate::error::SessionError;
use crate::protocol::ErrorBody;
use crate::service::Service;

pub struct ApiError(SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            SessionError::Validation { .. } => StatusCode::BAD_REQUEST,
            SessionError::Conflict(_) => StatusCode::CONFLICT,
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::Io(_) | SessionError::Core(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let field = match &self.0 {
            SessionError::Validation { field, .. } => field.clone(),
            _ => None,
        };
        let body = ErrorBody { code: self.0.code().into(), message: self.0.to_string(), field };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Parses a JSON body, reporting problems in the common error shape.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError(SessionError::Validation { message: format!("invalid request body: {e}"), field: None })
    })
}

async fn create(State(svc): State<Arc<Service>>, body: Bytes) -> Result<Response, ApiError> {
    let snapshot = svc.create(parse(&body)?)?;
    Ok((StatusCode::CREATED, Json(snapshot)).into_response())
}

async fn list(State(svc): State<Arc<Service>>) -> Json<Vec<crate::protocol::SessionListing>> {
    Json(svc.list())
}

async fn snapshot(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> ApiResult<crate::protocol::SessionSnapshot> {
    Ok(Json(svc.snapshot(&id)?))
}

async fn query(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> ApiResult<crate::protocol::EvalQuery> {
    Ok(Json(svc.query(&id)?))
}

async fn answer(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<crate::protocol::SubmitResponse> {
    // an unknown session is reported before a malformed body
    svc.snapshot(&id)?;
    Ok(Json(svc.submit(&id, parse(&body)?)?))
}

async fn export(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> ApiResult<crate::protocol::ReplayFile> {
    Ok(Json(svc.export(&id)?))
}

async fn import(State(svc): State<Arc<Service>>, body: Bytes) -> Result<Response, ApiError> {
    let snapshot = svc.import(parse(&body)?)?;
    Ok((StatusCode::CREATED, Json(snapshot)).into_response())
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn not_found() -> ApiError {
    ApiError(SessionError::NotFound("no such route".into()))
}

async fn method_not_allowed() -> Response {
    let body = ErrorBody {
        code: "method_not_allowed".into(),
        message: "method not allowed on this route".into(),
        field: None,
    };
    (StatusCode::METHOD_NOT_ALLOWED, Json(body)).into_response()
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create).get(list))
        .route("/sessions/import", post(import))
        .route("/sessions/{id}", get(snapshot))
        .route("/sessions/{id}/query", get(query))
        .route("/sessions/{id}/answers", post(answer))
        .route("/sessions/{id}/export", get(export))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(service)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    service: Arc<Service>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service)).with_graceful_shutdown(shutdown).await
}

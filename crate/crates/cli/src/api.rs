//! HTTP front end over [`Store`]. Every body carries `"v": 1`.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use entdetect_core::{DecisionPolicy, Error as CoreError, PauliString, Strategy};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::store::{Mode, NewSession, Store, StoreError, SCHEMA_VERSION};

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "v": SCHEMA_VERSION, "error": self.message }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::Conflict(_) => StatusCode::CONFLICT,
            StoreError::Core(c) => return c.into(),
            StoreError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<&CoreError> for ApiError {
    fn from(e: &CoreError) -> Self {
        let status = match e {
            CoreError::OutOfOrder { .. } | CoreError::DuplicateSetting(_) | CoreError::SessionFinished(_) => StatusCode::CONFLICT,
            CoreError::Io(_) | CoreError::Json(_) | CoreError::StringSearch { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(r.status(), r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::unprocessable(r.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn setting(s: &str) -> ApiResult<PauliString> {
    s.parse().map_err(|e: CoreError| (&e).into())
}

#[derive(Serialize)]
struct Created {
    v: u32,
    id: String,
    first_setting: Option<PauliString>,
    threshold: f64,
    strategy: Strategy,
}

async fn create(
    State(store): State<Arc<Store>>,
    body: Result<Json<NewSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Created>)> {
    let Json(req) = body?;
    // Branch construction can take a moment for large N.
    let view = tokio::task::spawn_blocking(move || store.create(&req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok((
        StatusCode::CREATED,
        Json(Created {
            v: SCHEMA_VERSION,
            id: view.meta.id.to_string(),
            first_setting: view.next_setting,
            threshold: view.meta.threshold,
            strategy: view.meta.strategy,
        }),
    ))
}

async fn show(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(store.get(&id)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordBody {
    setting: String,
    value: f64,
    #[serde(default)]
    stderr: Option<f64>,
    /// Only accepted when equal to the creation-time value.
    #[serde(default)]
    threshold: Option<f64>,
    #[serde(default)]
    mode: Option<Mode>,
}

async fn record(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Result<Json<RecordBody>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(b) = body?;
    store.check_fixed(&id, b.threshold, b.mode.as_ref())?;
    if b.stderr.is_some_and(|s| !(s.is_finite() && s >= 0.0)) {
        return Err(ApiError::unprocessable("stderr must be finite and non-negative"));
    }
    let s = setting(&b.setting)?;
    Ok(Json(store.record(&id, &s, b.value, b.stderr)?))
}

#[derive(Deserialize)]
struct WhatIfQuery {
    setting: String,
    value: f64,
}

async fn whatif(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    q: Result<Query<WhatIfQuery>, QueryRejection>,
) -> ApiResult<impl IntoResponse> {
    // Unknown ids win over malformed queries.
    store.get(&id)?;
    let Query(q) = q?;
    let w = store.whatif(&id, &setting(&q.setting)?, q.value)?;
    Ok(Json(json!({ "v": SCHEMA_VERSION, "setting": w.setting, "value": w.value, "sum": w.sum, "status": w.status })))
}

#[derive(Deserialize)]
struct TreeQuery {
    seed: Option<String>,
    relabel: Option<String>,
}

async fn tree(Path(n): Path<usize>, q: Result<Query<TreeQuery>, QueryRejection>) -> ApiResult<impl IntoResponse> {
    let Query(q) = q?;
    let seed = q.seed.as_deref().map(setting).transpose()?;
    let relabel = q.relabel.as_deref().map(|r| r.parse().map_err(|e: CoreError| ApiError::from(&e))).transpose()?;
    let policy = tokio::task::spawn_blocking(move || DecisionPolicy::new(n, None, Strategy::Tree { seed, relabel }))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| ApiError::from(&e))?;
    let branch = policy.tree().expect("tree strategy").to_json();
    Ok(Json(json!({
        "v": SCHEMA_VERSION,
        "n": branch.n,
        "threshold": policy.threshold(),
        "nodes": branch.nodes,
        "solid": branch.solid,
        "dashed": branch.dashed,
    })))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no such route")
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/record", post(record))
        .route("/sessions/{id}/whatif", get(whatif))
        .route("/trees/{n}", get(tree))
        .fallback(not_found)
        .with_state(store)
}

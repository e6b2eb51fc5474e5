//! HTTP API for the macsel calculator.
//!
//! Every response is `{"status": "ok", "data": ...}` or
//! `{"status": "error", "error": {"message": ..., "violations": [...]}}`.
//! The registry is read-only here; it is reloaded when its file changes.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::SystemTime;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use macsel_core::context::{NetworkContext, Violation};
use macsel_core::cpf::{linspace, report, sweep, SweepAxis, Weights};
use macsel_core::error::ModelError;
use macsel_core::radio::RadioProfile;
use macsel_core::registry::{select, Registry, RegistryError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

/// Largest number of (axis value, category) rows a sweep may produce.
pub const SWEEP_ROW_CAP: usize = 10_000;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateRequest {
    pub context: NetworkContext,
    pub profile: RadioProfile,
    pub weights: Weights,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectRequest {
    pub context: NetworkContext,
    pub profile: RadioProfile,
    pub weights: Weights,
    pub requirements: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRequest {
    #[serde(default)]
    pub context: NetworkContext,
    #[serde(default)]
    pub profile: RadioProfile,
    #[serde(default)]
    pub weights: Weights,
    pub axis: SweepAxis,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    violations: Vec<Violation>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                message: message.into(),
                violations: Vec::new(),
            },
        }
    }

    fn invalid(violations: Vec<Violation>) -> Self {
        let message = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: ErrorBody {
                message: format!("invalid request: {message}"),
                violations,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({"status": "error", "error": self.body});
        (self.status, Json(body)).into_response()
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidContext(v) => ApiError::invalid(v),
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, other.to_string()),
        }
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::NoSatisfyingCategory(_) | RegistryError::NoEvaluableCategory(_) => {
                ApiError::new(StatusCode::CONFLICT, e.to_string())
            }
            RegistryError::Invalid(v) => ApiError::invalid(v),
            RegistryError::Model(m) => m.into(),
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, other.to_string()),
        }
    }
}

fn ok<T: Serialize>(data: T) -> Response {
    Json(serde_json::json!({"status": "ok", "data": data})).into_response()
}

/// Syntax errors are 400; well-formed JSON of the wrong shape is 422 with the path.
fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_data() {
            ApiError::invalid(vec![Violation {
                field: path,
                rule: inner.to_string(),
            }])
        } else {
            ApiError::new(StatusCode::BAD_REQUEST, format!("malformed JSON: {inner}"))
        }
    })
}

fn check(ctx: &NetworkContext, prof: &RadioProfile, w: &Weights) -> Result<(), ApiError> {
    let mut v = ctx.validate();
    v.extend(prof.validate());
    v.extend(w.validate());
    if v.is_empty() {
        Ok(())
    } else {
        Err(ApiError::invalid(v))
    }
}

/// Where the registry comes from.
#[derive(Debug, Clone)]
pub enum RegistrySource {
    Seed,
    File(PathBuf),
}

#[derive(Debug)]
struct Cached {
    mtime: SystemTime,
    registry: Arc<Registry>,
}

#[derive(Debug, Clone)]
pub struct AppState {
    source: RegistrySource,
    cache: Arc<Mutex<Option<Cached>>>,
}

impl AppState {
    pub fn new(source: RegistrySource) -> Self {
        AppState {
            source,
            cache: Arc::new(Mutex::new(None)),
        }
    }

    /// The current registry snapshot, re-read if the file's mtime moved.
    pub fn registry(&self) -> Result<Arc<Registry>, ApiError> {
        let path = match &self.source {
            RegistrySource::Seed => return Ok(Arc::new(Registry::seed())),
            RegistrySource::File(p) => p,
        };
        let unavailable = |e: String| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("registry unavailable: {e}"));
        let mtime = std::fs::metadata(path)
            .and_then(|m| m.modified())
            .map_err(|e| unavailable(format!("{}: {e}", path.display())))?;
        let mut cache = self.cache.lock().expect("registry cache lock");
        if let Some(c) = cache.as_ref().filter(|c| c.mtime == mtime) {
            return Ok(c.registry.clone());
        }
        let text = std::fs::read_to_string(path).map_err(|e| unavailable(format!("{}: {e}", path.display())))?;
        let registry = if text.trim().is_empty() {
            Registry::empty()
        } else {
            Registry::from_json(&text).map_err(|e| unavailable(e.to_string()))?
        };
        log::info!("loaded registry from {}", path.display());
        let registry = Arc::new(registry);
        *cache = Some(Cached {
            mtime,
            registry: registry.clone(),
        });
        Ok(registry)
    }
}

async fn get_registry(State(state): State<AppState>) -> Result<Response, ApiError> {
    Ok(ok(&*state.registry()?))
}

async fn post_evaluate(body: Bytes) -> Result<Response, ApiError> {
    let req: EvaluateRequest = parse(&body)?;
    check(&req.context, &req.profile, &req.weights)?;
    Ok(ok(report(&req.context, &req.profile, &req.weights)?))
}

async fn post_select(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: SelectRequest = parse(&body)?;
    check(&req.context, &req.profile, &req.weights)?;
    let reg = state.registry()?;
    let wanted: BTreeSet<String> = req.requirements.into_iter().collect();
    Ok(ok(select(&reg, &req.context, &req.profile, &wanted, &req.weights)?))
}

async fn post_sweep(body: Bytes) -> Result<Response, ApiError> {
    let req: SweepRequest = parse(&body)?;
    check(&req.context, &req.profile, &req.weights)?;
    if !(req.from < req.to) {
        return Err(ApiError::invalid(vec![Violation {
            field: "from".into(),
            rule: format!("must be less than to ({} >= {})", req.from, req.to),
        }]));
    }
    if req.steps < 2 {
        return Err(ApiError::invalid(vec![Violation {
            field: "steps".into(),
            rule: format!("must be at least 2, got {}", req.steps),
        }]));
    }
    let categories = macsel_core::cpf::builtin_categories().len();
    let rows = req.steps.saturating_mul(categories);
    if rows > SWEEP_ROW_CAP {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("sweep would produce {rows} rows; the limit is {SWEEP_ROW_CAP}"),
        ));
    }
    let values = linspace(req.from, req.to, req.steps)?;
    Ok(ok(sweep(&req.context, &req.profile, &req.weights, req.axis, &values)?))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/registry", get(get_registry))
        .route("/api/evaluate", post(post_evaluate))
        .route("/api/select", post(post_select))
        .route("/api/sweep", post(post_sweep))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

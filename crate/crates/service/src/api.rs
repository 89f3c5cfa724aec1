//! JSON-over-HTTP front end. Request and response bodies are the serde
//! forms of the core types; errors are `{code, message, details}`.

use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query as UrlQuery, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use railsafe_core::ontology::OntologyError;
use railsafe_core::petri::{CriticalOptions, CriticalPredicate, ExplorationBounds, Explorer, PetriError};
use railsafe_core::query::{evaluate, parse_query, EvalMode, Projection, QueryError};
use railsafe_core::report::ValidationReport;
use railsafe_core::store::{Archive, ScenarioDocument, Status, StoreError};

use crate::ApiConfig;

pub struct AppState {
    pub archive: RwLock<Archive>,
    pub bounds: ExplorationBounds,
    pub time_budget: Duration,
    pub token: Option<String>,
}

impl AppState {
    pub fn new(archive: Archive, config: &ApiConfig) -> Self {
        Self {
            archive: RwLock::new(archive),
            bounds: config.bounds,
            time_budget: config.time_budget,
            token: config.token.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub details: Vec<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.into(),
            message: message.into(),
            details: Vec::new(),
        }
    }

    fn with_details(mut self, details: Vec<String>) -> Self {
        self.details = details;
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::IdConflict(_) => StatusCode::CONFLICT,
            StoreError::InvalidId(_) => StatusCode::BAD_REQUEST,
            StoreError::InvariantViolation { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            StoreError::Parse { .. } | StoreError::Io { .. } | StoreError::Ontology(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        let details = match &e {
            StoreError::InvariantViolation { problems, .. } => problems.clone(),
            _ => Vec::new(),
        };
        ApiError::new(status, e.code(), e.to_string()).with_details(details)
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::Store(s) => s.into(),
            QueryError::Syntax { line, column, ref expected, .. } => {
                let mut details = vec![format!("line {line}"), format!("column {column}")];
                details.extend(expected.iter().map(|x| format!("expected {x}")));
                ApiError::new(StatusCode::BAD_REQUEST, e.code(), e.to_string()).with_details(details)
            }
            QueryError::UnknownParameter { line, column, .. } => {
                ApiError::new(StatusCode::BAD_REQUEST, e.code(), e.to_string())
                    .with_details(vec![format!("line {line}"), format!("column {column}")])
            }
            QueryError::UnknownConcept(_) => ApiError::new(StatusCode::BAD_REQUEST, e.code(), e.to_string()),
        }
    }
}

impl From<PetriError> for ApiError {
    fn from(e: PetriError) -> Self {
        let details = match &e {
            PetriError::InvalidNet(r) => r.errors().map(ToString::to_string).collect(),
            _ => Vec::new(),
        };
        let code = match &e {
            PetriError::InvalidNet(_) => "invalid-net",
            PetriError::UnknownPlace(_) => "unknown-place",
            PetriError::UnknownTransition(_) => "unknown-transition",
            PetriError::NotEnabled(_) => "not-enabled",
            PetriError::InvalidBound(_) => "invalid-bound",
            PetriError::Overflow(_) => "overflow",
        };
        ApiError::new(StatusCode::BAD_REQUEST, code, e.to_string()).with_details(details)
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(bytes)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad-request", format!("invalid JSON body: {e}")))
}

fn poisoned() -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "archive lock poisoned")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/ontology/tree", get(ontology_tree))
        .route("/ontology/concepts/{id}/instances", get(concept_instances))
        .route("/scenarios", get(list_scenarios).post(create_scenario))
        .route("/scenarios/{id}", get(get_scenario).put(put_scenario))
        .route("/scenarios/{id}/validate", post(validate_scenario))
        .route("/scenarios/{id}/simulate", post(simulate_scenario))
        .route("/query", post(run_query))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such endpoint") })
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Adds CORS handling for the configured origins.
pub fn with_cors(router: Router, origins: &[String]) -> Router {
    if origins.is_empty() {
        return router;
    }
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::from(Any)
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    router.layer(
        CorsLayer::new()
            .allow_origin(allow)
            .allow_methods([Method::GET, Method::POST, Method::PUT])
            .allow_headers([header::CONTENT_TYPE, header::AUTHORIZATION]),
    )
}

async fn require_token(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|given| given == token);
        if !ok && req.method() != Method::OPTIONS {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token")
                .into_response();
        }
    }
    next.run(req).await
}

async fn ontology_tree(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    let o = state.archive.read().map_err(|_| poisoned())?.ontology().clone();
    Ok(Json(o.concept_tree()).into_response())
}

#[derive(Deserialize)]
struct InstancesParams {
    #[serde(default)]
    transitive: Option<bool>,
}

async fn concept_instances(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    UrlQuery(params): UrlQuery<InstancesParams>,
) -> ApiResult<Response> {
    let o = state.archive.read().map_err(|_| poisoned())?.ontology().clone();
    match o.instances_of(&id, params.transitive.unwrap_or(false)) {
        Ok(list) => Ok(Json(list).into_response()),
        Err(OntologyError::UnknownConcept(c)) => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown-concept",
            format!("no concept `{c}`"),
        )),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "ontology-error", e.to_string())),
    }
}

#[derive(Deserialize)]
struct ListParams {
    status: Option<String>,
    q: Option<String>,
}

async fn list_scenarios(
    State(state): State<Arc<AppState>>,
    UrlQuery(params): UrlQuery<ListParams>,
) -> ApiResult<Response> {
    let status = params
        .status
        .as_deref()
        .map(|s| s.parse::<Status>())
        .transpose()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad-request", e))?;
    let archive = state.archive.read().map_err(|_| poisoned())?;
    let mut rows = match params.q.as_deref() {
        None => archive.list(None),
        Some(text) => {
            let q = parse_query(text)?;
            evaluate(&q, &archive, Projection::Summaries, EvalMode::Index)?.summaries
        }
    };
    if let Some(st) = status {
        rows.retain(|r| r.status == st);
    }
    Ok(Json(rows).into_response())
}

#[derive(Serialize)]
struct Created {
    id: String,
}

async fn create_scenario(State(state): State<Arc<AppState>>, bytes: Bytes) -> ApiResult<Response> {
    let mut doc: ScenarioDocument = body(&bytes)?;
    let id = state.archive.write().map_err(|_| poisoned())?.save(&mut doc, false)?;
    Ok((StatusCode::CREATED, [(header::LOCATION, format!("/scenarios/{id}"))], Json(Created { id })).into_response())
}

async fn get_scenario(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let doc = state.archive.read().map_err(|_| poisoned())?.load(&id)?;
    Ok(Json(doc).into_response())
}

async fn put_scenario(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<Response> {
    let mut doc: ScenarioDocument = body(&bytes)?;
    if doc.id() != id {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "id-mismatch",
            format!("path id `{id}` differs from document id `{}`", doc.id()),
        ));
    }
    state.archive.write().map_err(|_| poisoned())?.save(&mut doc, true)?;
    Ok(Json(doc).into_response())
}

#[derive(Serialize)]
pub struct ValidateResponse {
    pub error_count: usize,
    pub warning_count: usize,
    pub summary: String,
    pub findings: Vec<railsafe_core::report::Finding>,
}

impl From<ValidationReport> for ValidateResponse {
    fn from(r: ValidationReport) -> Self {
        Self {
            error_count: r.error_count(),
            warning_count: r.warning_count(),
            summary: r.summary(),
            findings: r.findings,
        }
    }
}

async fn validate_scenario(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let archive = state.archive.read().map_err(|_| poisoned())?;
    let doc = archive.load(&id)?;
    Ok(Json(ValidateResponse::from(doc.validate(archive.ontology()))).into_response())
}

#[derive(Debug, Default, Deserialize)]
pub struct SimulateRequest {
    /// Overrides the document's own critical predicate.
    #[serde(default)]
    pub predicate: Option<String>,
    #[serde(default)]
    pub bounds: Option<ExplorationBounds>,
    #[serde(default)]
    pub all_paths: bool,
    /// Replace the document's tables with the result.
    #[serde(default)]
    pub store: bool,
}

async fn simulate_scenario(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<Response> {
    let req: SimulateRequest = if bytes.iter().all(u8::is_ascii_whitespace) {
        SimulateRequest::default()
    } else {
        body(&bytes)?
    };
    // Read lock only while loading; exploration runs without it.
    let doc = state.archive.read().map_err(|_| poisoned())?.load(&id)?;
    let Some(model) = doc.net.clone() else {
        return Err(ApiError::new(StatusCode::CONFLICT, "no-net", format!("scenario `{id}` has no net")));
    };
    let predicate: CriticalPredicate = match (&req.predicate, &model.predicate) {
        (Some(text), _) => text.parse().map_err(|e| {
            ApiError::new(StatusCode::BAD_REQUEST, "bad-predicate", format!("bad predicate: {e}"))
        })?,
        (None, Some(p)) => p.clone(),
        (None, None) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "no-predicate",
                "document has no critical predicate; pass one in the request",
            ))
        }
    };
    let explorer = Explorer::new(req.bounds.unwrap_or(state.bounds))
        .with_deadline(Instant::now() + state.time_budget);
    let options = CriticalOptions { all_paths: req.all_paths };
    let report = tokio::task::spawn_blocking(move || {
        explorer.find_critical(&model.net, &model.initial, &predicate, options)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;

    if req.store {
        let mut doc = doc;
        doc.tables = report.tables.clone();
        state.archive.write().map_err(|_| poisoned())?.save(&mut doc, true)?;
    }
    Ok(Json(report).into_response())
}

#[derive(Debug, Deserialize)]
pub struct QueryRequest {
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub projection: Projection,
    #[serde(default)]
    pub mode: EvalMode,
}

async fn run_query(State(state): State<Arc<AppState>>, bytes: Bytes) -> ApiResult<Response> {
    let req: QueryRequest = body(&bytes)?;
    let q = parse_query(&req.text)?;
    let archive = state.archive.read().map_err(|_| poisoned())?;
    Ok(Json(evaluate(&q, &archive, req.projection, req.mode)?).into_response())
}

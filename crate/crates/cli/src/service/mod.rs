//! HTTP/JSON session service: scenario state, disruptions, asynchronous
//! optimization runs and plan commitment.
//!
//! Mutations are serialized by a writer lock and publish a new immutable
//! session snapshot; readers clone the current snapshot and never block on
//! computation.

mod handlers;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};

use atfcm_core::trajectory::IntentVector;
use atfcm_core::{Error, Evaluator, MoeaConfig, PmfConfig, Scenario};
use axum::http::{HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;

use crate::commands::evaluate::{evaluate_plan, PlanEvaluation};
use crate::commands::optimize::ArchiveRecord;

/// Response header carrying the active scenario's version hash.
pub const VERSION_HEADER: &str = "x-scenario-version";
pub const PORT_ENV: &str = "ATFCM_PORT";
pub const DEFAULT_PORT: u16 = 8080;
pub const OPENAPI: &str = include_str!("../../../../docs/openapi.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CommitSource {
    Nominal,
    Archive { run_id: u64, index: usize },
}

/// Immutable view of the session published after every mutation.
pub struct Session {
    pub scenario: Scenario,
    pub evaluator: Arc<Evaluator>,
    pub version_hash: String,
    pub committed: IntentVector,
    pub source: CommitSource,
    /// Evaluation of the committed plan.
    pub plan: PlanEvaluation,
}

impl Session {
    pub fn new(scenario: Scenario, committed: Option<(IntentVector, CommitSource)>) -> Result<Self, Error> {
        let evaluator = Evaluator::new(&scenario, PmfConfig::default())?;
        let (committed, source) = committed.unwrap_or_else(|| (evaluator.nominal_intents(), CommitSource::Nominal));
        let plan = evaluate_plan(&evaluator, &committed)?;
        Ok(Self {
            version_hash: crate::version_hash(&scenario),
            scenario,
            evaluator: Arc::new(evaluator),
            committed,
            source,
            plan,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Queued,
    Running,
    Done,
    Failed,
}

pub struct RunRecord {
    pub status: RunStatus,
    pub version_hash: String,
    pub config: MoeaConfig,
    /// Generations completed.
    pub generation: usize,
    pub hypervolume: Vec<f64>,
    pub reference_point: Option<[f64; 2]>,
    pub archive: Option<Vec<ArchiveRecord>>,
    pub knee: Option<usize>,
    pub error: Option<String>,
    pub evaluator: Arc<Evaluator>,
}

pub struct AppState {
    session: RwLock<Arc<Session>>,
    writer: tokio::sync::Mutex<()>,
    runs: Mutex<BTreeMap<u64, RunRecord>>,
}

impl AppState {
    pub fn new(scenario: Scenario) -> Result<Arc<Self>, Error> {
        Ok(Arc::new(Self {
            session: RwLock::new(Arc::new(Session::new(scenario, None)?)),
            writer: tokio::sync::Mutex::new(()),
            runs: Mutex::new(BTreeMap::new()),
        }))
    }

    pub fn snapshot(&self) -> Arc<Session> {
        self.session.read().expect("session lock").clone()
    }

    fn publish(&self, session: Session) -> Arc<Session> {
        let session = Arc::new(session);
        *self.session.write().expect("session lock") = session.clone();
        session
    }
}

/// Error body `{"error": {"kind", "message"}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        Self { status, kind: kind.into(), message: message.into() }
    }

    pub fn not_found(kind: &str, id: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_id", format!("unknown {kind} '{id}'"))
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownId { .. } => StatusCode::NOT_FOUND,
            Error::Schema(_)
            | Error::UnknownVersion { .. }
            | Error::Config(_)
            | Error::ConstraintViolation { .. }
            | Error::GenomeLength { .. }
            | Error::Json(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.kind(), e.to_string())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: ErrorDetail<'a>,
}

#[derive(Serialize)]
struct ErrorDetail<'a> {
    kind: &'a str,
    message: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: ErrorDetail { kind: &self.kind, message: &self.message } };
        (self.status, Json(body)).into_response()
    }
}

async fn version_header(
    axum::extract::State(state): axum::extract::State<Arc<AppState>>,
    request: axum::extract::Request,
    next: axum::middleware::Next,
) -> Response {
    let mut response = next.run(request).await;
    let hash = state.snapshot().version_hash.clone();
    if let Ok(v) = HeaderValue::from_str(&hash) {
        response.headers_mut().insert(HeaderName::from_static(VERSION_HEADER), v);
    }
    response
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/scenario", get(handlers::get_scenario).post(handlers::post_scenario))
        .route("/disruption", post(handlers::post_disruption))
        .route("/occupancy", get(handlers::get_occupancy))
        .route("/optimize", post(handlers::post_optimize))
        .route("/runs", get(handlers::list_runs))
        .route("/runs/{id}", get(handlers::get_run))
        .route("/runs/{id}/knee", get(handlers::get_knee))
        .route("/commit", post(handlers::post_commit))
        .route("/flights/{id}/marginals", get(handlers::get_marginals))
        .route("/openapi.json", get(handlers::get_openapi))
        .layer(axum::middleware::from_fn_with_state(state.clone(), version_header))
        .with_state(state)
}

/// Route templates served by [`router`], for documentation checks.
pub const ROUTES: &[(&str, &str)] = &[
    ("get", "/scenario"),
    ("post", "/scenario"),
    ("post", "/disruption"),
    ("get", "/occupancy"),
    ("post", "/optimize"),
    ("get", "/runs"),
    ("get", "/runs/{id}"),
    ("get", "/runs/{id}/knee"),
    ("post", "/commit"),
    ("get", "/flights/{id}/marginals"),
    ("get", "/openapi.json"),
];

pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

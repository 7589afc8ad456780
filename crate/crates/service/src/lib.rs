//! HTTP API over analysis sessions.
//!
//! ```text
//! POST /sessions                                   {paths|documents, config?} -> 201 {id}
//! GET  /sessions                                   [{id, locked, retired, actions}]
//! GET  /sessions/{id}/report?format=json|csv|table
//! GET  /sessions/{id}/history                      action log
//! GET  /sessions/{id}/compartments/{cid}           one report row
//! POST /sessions/{id}/candidates                   coverage manifest entry -> evaluation
//! POST /sessions/{id}/compartments/{cid}/resolve   -> report
//! POST /sessions/{id}/stability                    {later_profile?, other_report?, k?}
//! GET  /healthz
//! ```

mod session;

use std::collections::HashMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use compass_core::coverage::{load_profile, InputCoverage};
use compass_core::report::entry_doc;
use compass_core::{
    render, still_locked, topk_overlap, AnalysisConfig, ArtifactDocuments, ArtifactPaths,
    CompartmentReport, Error, Format, RenderOptions, StabilityResult,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use uuid::Uuid;

pub use session::{Action, Applied, Session, SessionError};

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Conflict(String),
    Unprocessable(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": msg }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e.root() {
            Error::UnknownCompartment(_) => ApiError::NotFound(msg),
            Error::AlreadyRetired(_) => ApiError::Conflict(msg),
            Error::Invariant(_) => ApiError::Internal(msg),
            _ => ApiError::Unprocessable(msg),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Analysis(e) => e.into(),
            SessionError::Storage(e) => ApiError::Internal(format!("session storage: {e}")),
        }
    }
}

type Shared = Arc<RwLock<Session>>;

/// Registry of live sessions backed by a state directory.
#[derive(Clone)]
pub struct AppState {
    dir: PathBuf,
    sessions: Arc<RwLock<HashMap<Uuid, Shared>>>,
}

impl AppState {
    /// Opens `dir`, creating it if needed, and replays every session in it.
    /// Sessions that no longer replay are skipped with a warning.
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if !path.is_dir() {
                continue;
            }
            match Session::open(&path) {
                Ok(s) => {
                    sessions.insert(s.id, Arc::new(RwLock::new(s)));
                }
                Err(e) => tracing::warn!(path = %path.display(), error = ?e, "skipping session"),
            }
        }
        tracing::info!(sessions = sessions.len(), dir = %dir.display(), "state loaded");
        Ok(AppState {
            dir,
            sessions: Arc::new(RwLock::new(sessions)),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn session(&self, id: &str) -> Result<Shared, ApiError> {
        let unknown = || ApiError::NotFound(format!("unknown session {id}"));
        let id: Uuid = id.parse().map_err(|_| unknown())?;
        self.sessions
            .read()
            .expect("session registry poisoned")
            .get(&id)
            .cloned()
            .ok_or_else(unknown)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}/report", get(get_report))
        .route("/sessions/{id}/history", get(get_history))
        .route("/sessions/{id}/compartments/{cid}", get(get_compartment))
        .route("/sessions/{id}/compartments/{cid}/resolve", post(resolve))
        .route("/sessions/{id}/candidates", post(post_candidate))
        .route("/sessions/{id}/stability", post(stability))
        .with_state(state)
}

/// Serves `router` on `addr` until the process is stopped.
pub fn serve_blocking(state_dir: &Path, addr: SocketAddr) -> std::io::Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let state = AppState::open(state_dir)?;
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        axum::serve(listener, router(state)).await
    })
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub paths: Option<ArtifactPaths>,
    #[serde(default)]
    pub documents: Option<ArtifactDocuments>,
    #[serde(default)]
    pub config: AnalysisConfig,
}

async fn create_session(
    State(state): State<AppState>,
    Json(req): Json<CreateSession>,
) -> Result<impl IntoResponse, ApiError> {
    let root = state.dir.clone();
    let session = blocking(move || {
        let (docs, sources) = match (req.paths, req.documents) {
            (Some(paths), None) => (ArtifactDocuments::read(&paths)?, Some(paths)),
            (None, Some(docs)) => (docs, None),
            _ => {
                return Err(ApiError::BadRequest(
                    "exactly one of paths or documents is required".into(),
                ))
            }
        };
        Ok(Session::create(&root, docs, sources, req.config)?)
    })
    .await?;
    let body = json!({
        "id": session.id,
        "locked": session.report().entries.len(),
    });
    tracing::info!(id = %session.id, "session created");
    state
        .sessions
        .write()
        .expect("session registry poisoned")
        .insert(session.id, Arc::new(RwLock::new(session)));
    Ok((StatusCode::CREATED, Json(body)))
}

#[derive(Serialize)]
struct SessionSummary {
    id: Uuid,
    locked: usize,
    retired: usize,
    actions: usize,
}

async fn list_sessions(State(state): State<AppState>) -> Json<Vec<SessionSummary>> {
    let sessions = state.sessions.read().expect("session registry poisoned");
    let mut out: Vec<SessionSummary> = sessions
        .values()
        .map(|s| {
            let s = s.read().expect("session poisoned");
            SessionSummary {
                id: s.id,
                locked: s.report().entries.len(),
                retired: s.report().retired.len(),
                actions: s.actions().len(),
            }
        })
        .collect();
    out.sort_by_key(|s| s.id);
    Json(out)
}

fn current_report(state: &AppState, id: &str) -> Result<CompartmentReport, ApiError> {
    let session = state.session(id)?;
    let report = session.read().expect("session poisoned").report().clone();
    Ok(report)
}

fn report_response(report: &CompartmentReport, format: Format) -> Result<Response, ApiError> {
    let body = render(report, &RenderOptions::with_format(format))?;
    let mime = match format {
        Format::Json => "application/json",
        Format::Csv => "text/csv; charset=utf-8",
        Format::Table => "text/plain; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, mime)], body).into_response())
}

#[derive(Deserialize)]
struct ReportQuery {
    format: Option<String>,
}

async fn get_report(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ReportQuery>,
) -> Result<Response, ApiError> {
    let format = match q.format.as_deref() {
        None => Format::Json,
        Some(f) => f
            .parse()
            .map_err(|_| ApiError::BadRequest(format!("unknown format {f:?}")))?,
    };
    report_response(&current_report(&state, &id)?, format)
}

async fn get_history(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Vec<Action>>, ApiError> {
    let session = state.session(&id)?;
    let actions = session.read().expect("session poisoned").actions().to_vec();
    Ok(Json(actions))
}

async fn get_compartment(
    State(state): State<AppState>,
    UrlPath((id, cid)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let report = current_report(&state, &id)?;
    let row = match report.rank_of(&cid) {
        Some(rank) => entry_doc(rank, &report.entries[rank - 1]),
        None => {
            let c = report
                .retired
                .iter()
                .find(|c| c.id() == cid)
                .ok_or_else(|| ApiError::NotFound(format!("unknown compartment {cid}")))?;
            entry_doc(0, c)
        }
    };
    Ok(Json(row).into_response())
}

async fn apply(state: &AppState, id: &str, action: Action) -> Result<Applied, ApiError> {
    let session = state.session(id)?;
    blocking(move || {
        let mut s = session.write().expect("session poisoned");
        let applied = s.apply(action)?;
        tracing::info!(id = %s.id, actions = s.actions().len(), "action applied");
        Ok(applied)
    })
    .await
}

async fn resolve(
    State(state): State<AppState>,
    UrlPath((id, cid)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    match apply(&state, &id, Action::Resolve { compartment: cid }).await? {
        Applied::Report(report) => report_response(&report, Format::Json),
        Applied::Evaluation(_) => unreachable!("resolve yields a report"),
    }
}

async fn post_candidate(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(coverage): Json<InputCoverage>,
) -> Result<Response, ApiError> {
    match apply(&state, &id, Action::Candidate { coverage }).await? {
        Applied::Evaluation(eval) => Ok(Json(eval).into_response()),
        Applied::Report(_) => unreachable!("candidates yield an evaluation"),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityRequest {
    /// Later profile snapshot, in the profile JSONL format.
    #[serde(default)]
    pub later_profile: Option<String>,
    /// Another report in the export format.
    #[serde(default)]
    pub other_report: Option<serde_json::Value>,
    #[serde(default)]
    pub k: Option<usize>,
}

async fn stability(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<StabilityRequest>,
) -> Result<Json<StabilityResult>, ApiError> {
    if req.later_profile.is_none() && req.other_report.is_none() {
        return Err(ApiError::BadRequest(
            "later_profile or other_report is required".into(),
        ));
    }
    let report = current_report(&state, &id)?;
    blocking(move || {
        let mut out = StabilityResult::default();
        if let Some(text) = &req.later_profile {
            let later = load_profile(text.as_bytes(), "later")?;
            out.still_locked = Some(still_locked(&report, &later));
        }
        if let Some(other) = &req.other_report {
            let other = CompartmentReport::from_json(&other.to_string())?;
            let k = req.k.unwrap_or(report.config.top_k);
            out.topk_overlap = Some(topk_overlap(&report, &other, k));
        }
        Ok(Json(out))
    })
    .await
}

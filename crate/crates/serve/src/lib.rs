//! HTTP/JSON service behind the annotation tool.
//!
//! Pipeline artifacts (layouts, hierarchy, assignments, windows, events) are
//! loaded once and shared read-only. Each annotation session sits behind its
//! own mutex; a label is persisted to disk before the request is answered.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use pdl_core::annotate::{replay_payload, AnnotationSession, Progress, ReplayPayload, SampleStatus};
use pdl_core::corpus::{SensorEvent, Window};
use pdl_core::evalmap::LabelHierarchy;
use pdl_core::layout::HouseLayout;
use pdl_core::pipeline::artifacts::{self, session_file};
use pdl_core::pipeline::{propagate_session, reannotated_csv};
use pdl_core::scan::ClusterAssignment;
use pdl_core::Error;

/// Version stamped on every JSON payload.
pub const API_VERSION: u32 = 1;

/// Artifacts needed to export propagated labels.
#[derive(Debug)]
pub struct ExportData {
    pub assignments: Vec<ClusterAssignment>,
    pub windows: Vec<Window>,
    pub events: Vec<SensorEvent>,
}

#[derive(Debug)]
struct SessionSlot {
    path: PathBuf,
    session: Mutex<AnnotationSession>,
}

#[derive(Debug)]
pub struct AppState {
    hierarchy: LabelHierarchy,
    layouts: HashMap<String, HouseLayout>,
    sessions: HashMap<String, SessionSlot>,
    export: Option<ExportData>,
}

impl AppState {
    pub fn new(hierarchy: LabelHierarchy) -> Self {
        Self {
            hierarchy,
            layouts: HashMap::new(),
            sessions: HashMap::new(),
            export: None,
        }
    }

    pub fn with_layout(mut self, layout: HouseLayout) -> Self {
        self.layouts.insert(layout.dataset.clone(), layout);
        self
    }

    /// Registers a session persisted at `path`.
    pub fn with_session(mut self, session: AnnotationSession, path: PathBuf) -> Self {
        self.sessions.insert(
            session.session_id.clone(),
            SessionSlot {
                path,
                session: Mutex::new(session),
            },
        );
        self
    }

    pub fn with_export(mut self, export: ExportData) -> Self {
        self.export = Some(export);
        self
    }

    /// Loads everything a pipeline output directory offers: `layout.json`,
    /// every `sessions/*.json`, and the assignments, windows and events used by export.
    pub fn from_dir(dir: &Path, hierarchy: LabelHierarchy) -> pdl_core::Result<Self> {
        let mut state = Self::new(hierarchy);
        let layout = dir.join(artifacts::LAYOUT);
        if layout.exists() {
            state = state.with_layout(HouseLayout::from_json(&pdl_core::io::read_string(&layout)?)?);
        }
        let sessions = dir.join("sessions");
        if sessions.is_dir() {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&sessions)
                .map_err(|source| Error::Io {
                    path: sessions.clone(),
                    source,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            paths.sort();
            for path in paths {
                let session = AnnotationSession::load(&path)?;
                state = state.with_session(session, path);
            }
        }
        let needed = [artifacts::ASSIGNMENTS, artifacts::WINDOWS, artifacts::EVENTS];
        if needed.iter().all(|n| dir.join(n).exists()) {
            state = state.with_export(ExportData {
                assignments: pdl_core::io::read_jsonl(&dir.join(artifacts::ASSIGNMENTS))?,
                windows: pdl_core::io::read_jsonl(&dir.join(artifacts::WINDOWS))?,
                events: artifacts::events_from_csv(&pdl_core::io::read(&dir.join(artifacts::EVENTS))?)?,
            });
        }
        tracing::info!(
            layouts = state.layouts.len(),
            sessions = state.sessions.len(),
            export = state.export.is_some(),
            "artifacts loaded"
        );
        Ok(state)
    }

    /// Path a session created in `dir` is persisted to.
    pub fn session_path(dir: &Path, id: &str) -> PathBuf {
        dir.join(session_file(id))
    }
}

/// JSON error body with a matching status code.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    details: Option<serde_json::Value>,
}

impl ApiError {
    fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            kind: "not_found",
            message: message.into(),
            details: None,
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            kind: "validation",
            message: message.into(),
            details: None,
        }
    }

    fn conflict(message: impl Into<String>, details: serde_json::Value) -> Self {
        Self {
            status: StatusCode::CONFLICT,
            kind: "conflict",
            message: message.into(),
            details: Some(details),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            kind: "internal",
            message: message.into(),
            details: None,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownSample(_) => ApiError::not_found(e.to_string()),
            Error::UnknownLabel(_) | Error::InvalidArgument(_) => ApiError::validation(e.to_string()),
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = serde_json::json!({ "v": API_VERSION, "error": self.message, "kind": self.kind });
        if let Some(details) = self.details {
            body["details"] = details;
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleView {
    pub sample_id: usize,
    pub cluster: usize,
    pub window_id: usize,
    pub status: SampleStatus,
    /// The requesting rater's own label, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub my_label: Option<String>,
}

/// Session as seen by one rater: counts and statuses, never other raters' labels.
#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub v: u32,
    pub session_id: String,
    pub dataset_id: String,
    pub k: usize,
    pub rater_count: usize,
    pub samples: Vec<SampleView>,
    pub progress: Progress,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProgressView {
    pub v: u32,
    #[serde(flatten)]
    pub progress: Progress,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NextView {
    pub v: u32,
    pub done: bool,
    pub payload: Option<ReplayPayload>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelRequest {
    pub sample_id: usize,
    pub rater: String,
    pub label: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelResponse {
    pub v: u32,
    /// Label this rater had given the sample before, now replaced.
    pub prior: Option<String>,
    pub progress: Progress,
}

#[derive(Debug, Deserialize)]
pub struct RaterQuery {
    pub rater: Option<String>,
}

fn slot<'a>(state: &'a AppState, id: &str) -> ApiResult<&'a SessionSlot> {
    state
        .sessions
        .get(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown session {id}")))
}

async fn layout(State(state): State<Arc<AppState>>, UrlPath(dataset): UrlPath<String>) -> ApiResult<Json<HouseLayout>> {
    state
        .layouts
        .get(&dataset)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("no layout for dataset {dataset}")))
}

async fn session_view(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<RaterQuery>,
) -> ApiResult<Json<SessionView>> {
    let session = slot(&state, &id)?.session.lock().await;
    let samples = session
        .samples
        .iter()
        .map(|s| SampleView {
            sample_id: s.sample_id,
            cluster: s.sample.cluster,
            window_id: s.sample.window_id,
            status: session.status(s.sample_id),
            my_label: q.rater.as_deref().and_then(|rater| {
                session
                    .ratings_for(s.sample_id)
                    .find(|r| r.rater_id == rater)
                    .map(|r| r.label.clone())
            }),
        })
        .collect();
    Ok(Json(SessionView {
        v: API_VERSION,
        session_id: session.session_id.clone(),
        dataset_id: session.dataset_id.clone(),
        k: session.k,
        rater_count: session.rater_count,
        samples,
        progress: session.progress(),
    }))
}

async fn next(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<RaterQuery>,
) -> ApiResult<Json<NextView>> {
    let rater = q
        .rater
        .filter(|r| !r.trim().is_empty())
        .ok_or_else(|| ApiError::validation("query parameter `rater` is required"))?;
    let session = slot(&state, &id)?.session.lock().await;
    let payload = session.next_for(&rater).map(|s| replay_payload(s, &state.hierarchy));
    Ok(Json(NextView {
        v: API_VERSION,
        done: payload.is_none(),
        payload,
    }))
}

async fn label(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<LabelRequest>, JsonRejection>,
) -> ApiResult<Json<LabelResponse>> {
    let Json(req) = body.map_err(|e| ApiError::validation(e.body_text()))?;
    let slot = slot(&state, &id)?;
    let mut session = slot.session.lock().await;
    let mut updated = session.clone();
    let prior = updated.record_label(req.sample_id, &req.rater, &req.label, &state.hierarchy)?;
    let path = slot.path.clone();
    let to_save = updated.clone();
    tokio::task::spawn_blocking(move || to_save.save(&path))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    *session = updated;
    tracing::info!(session = %id, sample = req.sample_id, rater = %req.rater, "label recorded");
    Ok(Json(LabelResponse {
        v: API_VERSION,
        prior,
        progress: session.progress(),
    }))
}

async fn progress(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<ProgressView>> {
    let session = slot(&state, &id)?.session.lock().await;
    Ok(Json(ProgressView {
        v: API_VERSION,
        progress: session.progress(),
    }))
}

async fn export(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let session = slot(&state, &id)?.session.lock().await.clone();
    let unmapped = session.unmapped_clusters();
    if !unmapped.is_empty() {
        return Err(ApiError::conflict("clusters unmapped", serde_json::json!({ "clusters": unmapped })));
    }
    let data = state
        .export
        .as_ref()
        .ok_or_else(|| ApiError::not_found("assignments, windows or events are not available for export"))?;
    let result = propagate_session(&session, &state.hierarchy, &data.assignments, &data.windows, &data.events)?;
    let csv = reannotated_csv(&data.events, &result)?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/layout/{dataset}", get(layout))
        .route("/api/session/{id}", get(session_view))
        .route("/api/session/{id}/next", get(next))
        .route("/api/session/{id}/label", post(label))
        .route("/api/session/{id}/progress", get(progress))
        .route("/api/export/{id}", get(export))
        .with_state(Arc::new(state))
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use super::job::{JobState, ProcessingJob};
use super::store::{Inserted, Store};
use crate::corpus::{parse_transcript, DecisionItem, MeetingMeta, MeetingStatus, TranscriptFormat, Utterance};
use crate::error::Error;
use crate::pipeline::{run_pipeline, Stage, TagPredictor, UtteranceRewriter};

const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

/// Shared handler state. Models are immutable and shared across jobs.
pub struct AppState {
    pub store: Store,
    pub detector: Arc<dyn TagPredictor>,
    pub rewriter: Arc<dyn UtteranceRewriter>,
    /// Bearer token required on every API route when set.
    pub auth_token: Option<String>,
    in_flight: Mutex<HashSet<String>>,
}

impl AppState {
    pub fn new(
        store: Store,
        detector: Arc<dyn TagPredictor>,
        rewriter: Arc<dyn UtteranceRewriter>,
        auth_token: Option<String>,
    ) -> Arc<Self> {
        Arc::new(AppState {
            store,
            detector,
            rewriter,
            auth_token,
            in_flight: Mutex::new(HashSet::new()),
        })
    }
}

/// JSON error body: `{"error": {"code": …, "message": …, "line": …}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    line: Option<usize>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            line: None,
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<usize>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": ErrorBody {
            code: self.code,
            message: &self.message,
            line: self.line,
        }});
        (self.status, Json(body)).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Parse { line, .. } => ApiError {
                line: Some(line),
                ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "parse_error", message)
            },
            Error::EmptyTranscript => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_transcript", message),
            Error::Validation(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_error", message),
            Error::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "not_found", message),
            Error::Conflict(_) => ApiError::new(StatusCode::CONFLICT, "conflict", message),
            _ => {
                tracing::error!(error = %message, "request failed");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
            }
        }
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> crate::Result<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn require_token(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.auth_token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|v| v == token);
        if !ok {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid bearer token")
                .into_response();
        }
    }
    next.run(req).await
}

/// API routes, plus the review UI's static files when `static_dir` is set.
pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/meetings", post(upload_meeting).get(list_meetings))
        .route("/meetings/{id}/process", post(process_meeting))
        .route("/meetings/{id}/job", get(get_job))
        .route("/meetings/{id}/decisions", get(get_decisions))
        .route("/meetings/{id}/transcript", get(get_transcript))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app).await
}

#[derive(Debug, Default, Deserialize)]
struct UploadMetadata {
    id: Option<String>,
    title: Option<String>,
    recorded_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UploadResponse {
    pub id: String,
    pub status: MeetingStatus,
    pub replayed: bool,
}

async fn upload_meeting(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    mut multipart: Multipart,
) -> ApiResult<(StatusCode, Json<UploadResponse>)> {
    let bad = |m: String| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", m);
    let mut transcript = None;
    let mut metadata = UploadMetadata::default();
    while let Some(field) = multipart.next_field().await.map_err(|e| bad(e.to_string()))? {
        match field.name() {
            Some("transcript") => transcript = Some(field.bytes().await.map_err(|e| bad(e.to_string()))?),
            Some("metadata") => {
                let raw = field.bytes().await.map_err(|e| bad(e.to_string()))?;
                metadata = serde_json::from_slice(&raw)
                    .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_metadata", e.to_string()))?;
            }
            _ => {}
        }
    }
    let transcript = transcript.ok_or_else(|| bad("multipart field \"transcript\" is required".into()))?;
    let key = match headers.get("idempotency-key") {
        Some(v) => Some(v.to_str().map_err(|e| bad(e.to_string()))?.to_owned()),
        None => None,
    };
    let id = metadata
        .id
        .filter(|s| !s.trim().is_empty())
        .unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
    let meta = MeetingMeta {
        title: metadata.title.unwrap_or_else(|| id.clone()),
        id,
        recorded_at: metadata.recorded_at,
    };
    let meeting = parse_transcript(transcript.as_ref(), TranscriptFormat::Jsonl, meta)?;
    let inserted = blocking(move || state.store.insert_meeting(&meeting, key.as_deref())).await?;
    Ok(match inserted {
        Inserted::Created(id) => (
            StatusCode::CREATED,
            Json(UploadResponse {
                id,
                status: MeetingStatus::Uploaded,
                replayed: false,
            }),
        ),
        Inserted::Replayed((id, status)) => (StatusCode::OK, Json(UploadResponse { id, status, replayed: true })),
    })
}

async fn list_meetings(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<super::MeetingSummary>>> {
    Ok(Json(blocking(move || state.store.list_meetings()).await?))
}

/// Clears a meeting's in-flight mark when the job ends, panics included.
struct InFlight {
    state: Arc<AppState>,
    meeting_id: String,
}

impl Drop for InFlight {
    fn drop(&mut self) {
        self.state
            .in_flight
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .remove(&self.meeting_id);
    }
}

async fn process_meeting(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<(StatusCode, Json<ProcessingJob>)> {
    let meeting = {
        let state = state.clone();
        let id = id.clone();
        blocking(move || state.store.get_meeting(&id)).await?
    };
    let claimed = state.in_flight.lock().unwrap_or_else(|p| p.into_inner()).insert(id.clone());
    if !claimed {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "job_in_progress",
            format!("meeting {id} is already being processed"),
        ));
    }
    let guard = InFlight {
        state: state.clone(),
        meeting_id: id.clone(),
    };
    let job = ProcessingJob::new(&id);
    {
        let state = state.clone();
        let job = job.clone();
        blocking(move || state.store.put_job(&job)).await?;
    }
    let queued = job.clone();
    tokio::task::spawn_blocking(move || {
        let _guard = guard;
        run_job(&state, meeting, job);
    });
    Ok((StatusCode::ACCEPTED, Json(queued)))
}

fn run_job(state: &AppState, meeting: crate::corpus::Meeting, mut job: ProcessingJob) {
    let save = |job: &ProcessingJob| {
        if let Err(e) = state.store.put_job(job) {
            tracing::error!(job = %job.id, error = %e, "could not persist job state");
        }
    };
    let result = run_pipeline(&meeting, state.detector.as_ref(), state.rewriter.as_ref(), |stage| {
        let next = match stage {
            Stage::Detecting => JobState::Detecting,
            Stage::Rewriting => JobState::Rewriting,
        };
        if job.advance(next).is_ok() {
            save(&job);
        }
    })
    .and_then(|out| {
        job.timings.detecting_ms = Some(out.detecting.as_millis() as u64);
        job.timings.rewriting_ms = Some(out.rewriting.as_millis() as u64);
        state.store.replace_decisions(&meeting.id, &out.items)?;
        Ok(out.items.len())
    });
    match result {
        Ok(count) => {
            tracing::info!(meeting = %meeting.id, items = count, "processing done");
            let _ = job.advance(JobState::Done);
        }
        Err(e) => {
            tracing::warn!(meeting = %meeting.id, error = %e, "processing failed");
            let _ = job.fail(e.to_string());
            if let Err(e) = state.store.set_status(&meeting.id, MeetingStatus::Failed) {
                tracing::error!(meeting = %meeting.id, error = %e, "could not mark meeting failed");
            }
        }
    }
    save(&job);
}

async fn get_job(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<ProcessingJob>> {
    Ok(Json(blocking(move || state.store.get_job(&id)).await?))
}

async fn get_decisions(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<DecisionItem>>> {
    Ok(Json(blocking(move || state.store.get_decisions(&id)).await?))
}

#[derive(Debug, Deserialize)]
struct TranscriptQuery {
    anchor: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TranscriptView {
    pub meeting_id: String,
    pub title: String,
    /// Utterance the client should scroll to the bottom of the view.
    pub anchor: Option<String>,
    pub utterances: Vec<Utterance>,
}

async fn get_transcript(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<TranscriptQuery>,
) -> ApiResult<Json<TranscriptView>> {
    let meeting = blocking(move || state.store.get_meeting(&id)).await?;
    if let Some(anchor) = &q.anchor {
        if meeting.utterance(anchor).is_none() {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                "anchor_not_found",
                format!("utterance {anchor} not in meeting {}", meeting.id),
            ));
        }
    }
    Ok(Json(TranscriptView {
        meeting_id: meeting.id,
        title: meeting.title,
        anchor: q.anchor,
        utterances: meeting.utterances,
    }))
}

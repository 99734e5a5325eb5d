//! HTTP/JSON API over the authoring engine.
//!
//! Errors are `{"code", "message", "details": [...]}`; failures of a model
//! call also carry the audited `exchanges`. Mutating requests honour an
//! `Idempotency-Key` header: a retry with the same key, method and path
//! receives the stored response instead of running again.

mod idempotency;

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use healthdial_core::editing::EditCommand;
use healthdial_core::engine::{Engine, EngineError, ErrorClass, ProjectSummary};
use healthdial_core::model::MaterialSource;
use healthdial_core::orchestration::LlmExchange;
use healthdial_core::runtime::transcript_jsonl;
use healthdial_core::{PlayId, ProjectId, SessionId, StateId};

pub use idempotency::IdempotencyCache;

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub token: Option<Arc<str>>,
    pub idempotency: Arc<IdempotencyCache>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>, token: Option<String>) -> Self {
        Self {
            engine,
            token: token.map(Into::into),
            idempotency: Arc::new(IdempotencyCache::new(1024)),
        }
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/plan", post(plan).get(get_plan))
        .route("/projects/{id}/plan/approve", put(approve_plan))
        .route("/projects/{id}/generate", post(generate_all))
        .route("/projects/{id}/sessions/{sid}", get(get_session))
        .route("/projects/{id}/sessions/{sid}/generate", post(generate))
        .route(
            "/projects/{id}/sessions/{sid}/states/{state}/suggest",
            post(suggest),
        )
        .route("/projects/{id}/edits", post(edit))
        .route("/projects/{id}/undo", post(undo))
        .route("/projects/{id}/redo", post(redo))
        .route("/projects/{id}/history", get(history))
        .route("/projects/{id}/export", get(export))
        .route("/projects/{id}/import", post(import))
        .route("/projects/{id}/stats", get(stats))
        .route("/projects/{id}/exchanges", get(exchanges))
        .route("/projects/{id}/progress", get(progress))
        .route("/projects/{id}/play/{sid}", post(start_play))
        .route("/play/{play}", get(get_play))
        .route("/play/{play}/choose", post(choose))
        .route("/play/{play}/transcript", get(transcript))
        .layer(middleware::from_fn_with_state(
            state.clone(),
            idempotency::layer,
        ))
        .layer(middleware::from_fn_with_state(state.clone(), auth));
    Router::new()
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }))
        .merge(api)
        .fallback(|| async {
            ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such route")
        })
        .with_state(state)
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub details: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub exchanges: Vec<LlmExchange>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.to_string(),
            message: message.into(),
            details: Vec::new(),
            exchanges: Vec::new(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match e.class() {
            ErrorClass::BadRequest => StatusCode::BAD_REQUEST,
            ErrorClass::NotFound => StatusCode::NOT_FOUND,
            ErrorClass::Conflict => StatusCode::CONFLICT,
            ErrorClass::Unprocessable => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorClass::Upstream => StatusCode::BAD_GATEWAY,
            ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %e, "engine failure");
        }
        Self {
            status,
            code: e.code().to_string(),
            message: e.to_string(),
            details: e.details(),
            exchanges: e.exchanges().to_vec(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        let code = match r.status() {
            StatusCode::UNSUPPORTED_MEDIA_TYPE => "unsupported-media-type",
            _ => "bad-request",
        };
        Self::new(r.status(), code, r.body_text())
    }
}

/// `Json` whose rejections use the API error shape.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let Json(value) = Json::<T>::from_request(req, state).await?;
        Ok(Self(value))
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// An empty body means "no options".
fn optional_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<Option<T>> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(None);
    }
    serde_json::from_slice(body)
        .map(Some)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad-request", e.to_string()))
}

/// Runs blocking engine work (file IO, model calls) off the async runtime.
async fn run<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Engine) -> Result<T, EngineError> + Send + 'static,
{
    let engine = state.engine.clone();
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
        })?
        .map_err(ApiError::from)
}

fn project_id(raw: &str) -> ApiResult<ProjectId> {
    ProjectId::new(raw).map_err(|_| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "project-not-found",
            format!("project {raw:?} not found"),
        )
    })
}

fn session_id(raw: &str) -> ApiResult<SessionId> {
    SessionId::new(raw).map_err(|_| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown-session",
            format!("session {raw:?} not found"),
        )
    })
}

fn state_id(raw: &str) -> ApiResult<StateId> {
    StateId::new(raw).map_err(|_| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown-state",
            format!("state {raw:?} not found"),
        )
    })
}

fn play_id(raw: &str) -> ApiResult<PlayId> {
    PlayId::new(raw).map_err(|_| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "play-not-found",
            format!("play {raw:?} not found"),
        )
    })
}

// ---------------------------------------------------------------------------
// Auth
// ---------------------------------------------------------------------------

async fn auth(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|given| given == &**token);
        if !ok {
            return ApiError::new(
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                "missing or wrong bearer token",
            )
            .into_response();
        }
    }
    next.run(req).await
}

// ---------------------------------------------------------------------------
// Projects
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
pub struct MaterialFile {
    pub name: String,
    #[serde(default)]
    pub content_type: Option<String>,
    /// File bytes, base64.
    pub data: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateProject {
    pub title: String,
    #[serde(default)]
    pub material_text: Option<String>,
    #[serde(default)]
    pub material_file: Option<MaterialFile>,
}

#[derive(Debug, Deserialize)]
struct TitleQuery {
    title: Option<String>,
}

fn unsupported(message: impl Into<String>) -> ApiError {
    ApiError::new(
        StatusCode::UNSUPPORTED_MEDIA_TYPE,
        "unsupported-media-type",
        message,
    )
}

fn decode_upload(file: &MaterialFile) -> ApiResult<String> {
    if let Some(ct) = &file.content_type {
        if !ct.starts_with("text/") {
            return Err(unsupported(format!("{} is {ct}, not text", file.name)));
        }
    }
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(file.data.as_bytes())
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad-request", e.to_string()))?;
    let text = String::from_utf8(bytes)
        .map_err(|_| unsupported(format!("{} is not UTF-8 text", file.name)))?;
    if text.contains('\0') {
        return Err(unsupported(format!("{} looks binary", file.name)));
    }
    Ok(text)
}

/// Accepts JSON (`material_text` or a base64 `material_file`) or a raw
/// `text/plain` body with `?title=`.
async fn create_project(
    State(state): State<AppState>,
    Query(query): Query<TitleQuery>,
    headers: HeaderMap,
    body: axum::body::Bytes,
) -> ApiResult<Response> {
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_ascii_lowercase();
    if body.is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "empty-material",
            "request body is empty",
        ));
    }
    let (title, text, source, name) = if content_type.starts_with("text/plain") {
        let text = String::from_utf8(body.to_vec())
            .map_err(|_| unsupported("body is not UTF-8 text"))?;
        let title = query.title.unwrap_or_else(|| "Untitled".into());
        (title, text, MaterialSource::Pasted, None)
    } else if content_type.starts_with("application/json") {
        let req: CreateProject = serde_json::from_slice(&body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad-request", e.to_string()))?;
        match (req.material_text, req.material_file) {
            (Some(text), None) => (req.title, text, MaterialSource::Pasted, None),
            (None, Some(file)) => {
                let text = decode_upload(&file)?;
                (req.title, text, MaterialSource::ImportedFile, Some(file.name))
            }
            _ => {
                return Err(ApiError::new(
                    StatusCode::BAD_REQUEST,
                    "bad-request",
                    "give exactly one of material_text or material_file",
                ))
            }
        }
    } else {
        return Err(unsupported(format!(
            "expected application/json or text/plain, got {content_type:?}"
        )));
    };
    let project = run(&state, move |e| e.create_project(&title, &text, source, name)).await?;
    Ok((StatusCode::CREATED, Json(ProjectSummary::of(&project))).into_response())
}

async fn list_projects(State(state): State<AppState>) -> ApiResult<Json<Value>> {
    let ids = run(&state, |e| e.list()).await?;
    Ok(Json(json!({ "projects": ids })))
}

async fn get_project(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<ProjectSummary>> {
    let id = project_id(&id)?;
    let project = run(&state, move |e| e.load(&id)).await?;
    Ok(Json(ProjectSummary::of(&project)))
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    #[serde(default)]
    pub cue: Option<String>,
}

async fn plan(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: axum::body::Bytes,
) -> ApiResult<Json<Value>> {
    let id = project_id(&id)?;
    let cue = optional_json::<PlanRequest>(&body)?.and_then(|b| b.cue);
    let (plan, exchanges) = run(&state, move |e| e.plan(&id, cue.as_deref())).await?;
    Ok(Json(json!({ "plan": plan, "exchanges": exchanges })))
}

async fn get_plan(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let id = project_id(&id)?;
    let project = run(&state, move |e| e.load(&id)).await?;
    Ok(Json(json!({
        "plan": project.plan(),
        "plan_approved": project.plan_approved,
    })))
}

async fn approve_plan(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    let id = project_id(&id)?;
    let plan = run(&state, move |e| e.approve_plan(&id)).await?;
    Ok(Json(json!({ "plan": plan, "plan_approved": true })))
}

async fn generate(
    State(state): State<AppState>,
    Path((id, sid)): Path<(String, String)>,
) -> ApiResult<Json<Value>> {
    let id = project_id(&id)?;
    let sid = session_id(&sid)?;
    let (generated, exchanges) = run(&state, move |e| e.generate(&id, &sid)).await?;
    Ok(Json(json!({
        "fsm": generated.fsm,
        "coverage": generated.coverage,
        "exchanges": exchanges,
    })))
}

async fn generate_all(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    let id = project_id(&id)?;
    let all = run(&state, move |e| e.generate_all(&id)).await?;
    let sessions: Vec<Value> = all
        .into_iter()
        .map(|(sid, g)| json!({"session_id": sid, "fsm": g.fsm, "coverage": g.coverage}))
        .collect();
    Ok(Json(json!({ "sessions": sessions })))
}

async fn get_session(
    State(state): State<AppState>,
    Path((id, sid)): Path<(String, String)>,
) -> ApiResult<Json<Value>> {
    let id = project_id(&id)?;
    let sid = session_id(&sid)?;
    let project = run(&state, move |e| e.load(&id)).await?;
    let topic = project.plan().session(&sid).ok_or_else(|| {
        ApiError::from(EngineError::UnknownSession(sid.clone()))
    })?;
    Ok(Json(json!({
        "topic": topic,
        "fsm": project.fsm(&sid),
    })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuggestRequest {
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_count() -> usize {
    3
}

async fn suggest(
    State(state): State<AppState>,
    Path((id, sid, st)): Path<(String, String, String)>,
    body: axum::body::Bytes,
) -> ApiResult<Json<Value>> {
    let id = project_id(&id)?;
    let sid = session_id(&sid)?;
    let st = state_id(&st)?;
    let count = optional_json::<SuggestRequest>(&body)?.map_or(default_count(), |b| b.count);
    if !(1..=10).contains(&count) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad-request",
            "count must be between 1 and 10",
        ));
    }
    let (options, exchanges) = run(&state, move |e| e.suggest(&id, &sid, &st, count)).await?;
    Ok(Json(json!({ "options": options, "exchanges": exchanges })))
}

// ---------------------------------------------------------------------------
// Editing
// ---------------------------------------------------------------------------

async fn edit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(cmd): ApiJson<EditCommand>,
) -> ApiResult<Response> {
    let id = project_id(&id)?;
    let outcome = run(&state, move |e| e.edit(&id, cmd)).await?;
    Ok(Json(outcome).into_response())
}

async fn undo(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = project_id(&id)?;
    let outcome = run(&state, move |e| e.undo(&id)).await?;
    Ok(Json(outcome).into_response())
}

async fn redo(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = project_id(&id)?;
    let outcome = run(&state, move |e| e.redo(&id)).await?;
    Ok(Json(outcome).into_response())
}

async fn history(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let id = project_id(&id)?;
    let project = run(&state, move |e| e.load(&id)).await?;
    let h = project.history();
    let entries: Vec<Value> = h
        .entries()
        .iter()
        .map(|e| json!({"command": e.command, "hash_after": e.hash_after}))
        .collect();
    Ok(Json(json!({
        "summary": h.summary(),
        "base_hash": h.base_hash(),
        "entries": entries,
    })))
}

// ---------------------------------------------------------------------------
// Export / import / stats
// ---------------------------------------------------------------------------

const HDFSM_CONTENT_TYPE: &str = "text/plain; charset=utf-8";

async fn export(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = project_id(&id)?;
    let name = format!("{id}.{}", healthdial_core::markup::FILE_EXTENSION);
    let text = run(&state, move |e| e.export(&id)).await?;
    Ok((
        [
            (header::CONTENT_TYPE, HDFSM_CONTENT_TYPE.to_string()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{name}\""),
            ),
        ],
        text,
    )
        .into_response())
}

async fn import(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: axum::body::Bytes,
) -> ApiResult<Json<Value>> {
    let id = project_id(&id)?;
    let text = String::from_utf8(body.to_vec()).map_err(|_| unsupported("body is not UTF-8"))?;
    let sessions = run(&state, move |e| e.import(&id, &text)).await?;
    Ok(Json(json!({ "sessions": sessions })))
}

async fn stats(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = project_id(&id)?;
    let stats = run(&state, move |e| e.stats(&id)).await?;
    Ok(Json(stats).into_response())
}

async fn exchanges(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    let id = project_id(&id)?;
    let list = run(&state, move |e| e.exchanges(&id)).await?;
    Ok(Json(json!({ "exchanges": list })))
}

async fn progress(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = project_id(&id)?;
    let ledger = run(&state, move |e| e.progress(&id)).await?;
    Ok(Json(ledger).into_response())
}

// ---------------------------------------------------------------------------
// Playthrough
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChooseRequest {
    pub index: usize,
}

async fn start_play(
    State(state): State<AppState>,
    Path((id, sid)): Path<(String, String)>,
) -> ApiResult<Response> {
    let id = project_id(&id)?;
    let sid = session_id(&sid)?;
    let view = run(&state, move |e| e.start_play(&id, &sid)).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn choose(
    State(state): State<AppState>,
    Path(play): Path<String>,
    ApiJson(req): ApiJson<ChooseRequest>,
) -> ApiResult<Response> {
    let play = play_id(&play)?;
    let view = run(&state, move |e| e.choose(&play, req.index)).await?;
    Ok(Json(view).into_response())
}

async fn get_play(State(state): State<AppState>, Path(play): Path<String>) -> ApiResult<Response> {
    let play = play_id(&play)?;
    let view = run(&state, move |e| e.play_view(&play)).await?;
    Ok(Json(view).into_response())
}

async fn transcript(
    State(state): State<AppState>,
    Path(play): Path<String>,
) -> ApiResult<Response> {
    let play = play_id(&play)?;
    let view = run(&state, move |e| e.play_view(&play)).await?;
    Ok((
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        transcript_jsonl(&view.transcript),
    )
        .into_response())
}

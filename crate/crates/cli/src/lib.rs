//! HTTP service for the steering UI.
//!
//! * `POST /solve`: one scenario, solved statelessly; the body is a scenario
//!   file and the response is the list of [`SolveReport`]s the CLI writes.
//! * `POST /sessions`, `POST /sessions/{id}/step`, `GET /sessions/{id}`:
//!   navigation sessions held in memory, one command at a time per session.
//! * `GET /scenes`, `GET /scenes/{name}`: built-in channel scenes.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ballchain::navigation::{
    ChannelScene, Command, LogEntry, NavigationSession, SceneFile, SessionSettings,
};
use ballchain::scenario::{parse_json, DesignSelection};
use ballchain::{BallChainDesign, DesignSpec, Error, Scenario, SolveReport};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

pub const DEFAULT_BIND: &str = "127.0.0.1:8700";
pub const DEFAULT_IDLE: Duration = Duration::from_secs(30 * 60);

/// Error response: status plus `{"error", "path"}` body.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub path: Option<String>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<&'a str>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            path: None,
        }
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("{what} not found"))
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } | Error::InvalidInput(_) => StatusCode::BAD_REQUEST,
            Error::Singularity { .. } | Error::DegenerateGeometry(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let path = match &e {
            Error::Parse { path, .. } => Some(path.clone()),
            _ => None,
        };
        Self {
            status,
            message: e.to_string(),
            path,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: &self.message,
            path: self.path.as_deref(),
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

struct Slot {
    session: Arc<tokio::sync::Mutex<NavigationSession>>,
    last_active: Mutex<Instant>,
}

impl Slot {
    fn touch(&self) {
        *self.last_active.lock().expect("clock lock") = Instant::now();
    }
}

/// Shared service state: the session table.
#[derive(Clone)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, Arc<Slot>>>>,
    idle_timeout: Duration,
}

impl Default for AppState {
    fn default() -> Self {
        Self::new(DEFAULT_IDLE)
    }
}

impl AppState {
    pub fn new(idle_timeout: Duration) -> Self {
        Self {
            sessions: Arc::default(),
            idle_timeout,
        }
    }

    /// Drops sessions idle for longer than the timeout and not mid-step.
    pub fn purge_expired(&self) -> usize {
        let mut map = self.sessions.lock().expect("session table lock");
        let before = map.len();
        let timeout = self.idle_timeout;
        map.retain(|_, slot| {
            let idle = slot.last_active.lock().expect("clock lock").elapsed();
            idle <= timeout || slot.session.try_lock().is_err()
        });
        before - map.len()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session table lock").len()
    }

    /// Handle to a session's lock, for embedding and tests.
    pub fn session(&self, id: &str) -> Option<Arc<tokio::sync::Mutex<NavigationSession>>> {
        self.slot(id).map(|s| s.session.clone())
    }

    fn slot(&self, id: &str) -> Option<Arc<Slot>> {
        self.sessions
            .lock()
            .expect("session table lock")
            .get(id)
            .cloned()
    }
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::predicate(|origin: &HeaderValue, _| {
            origin.to_str().is_ok_and(|o| {
                ["http://localhost", "http://127.0.0.1", "http://[::1]"]
                    .iter()
                    .any(|p| o == *p || o.strip_prefix(p).is_some_and(|rest| rest.starts_with(':')))
            })
        }))
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/solve", post(solve))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/step", post(step_session))
        .route("/scenes", get(list_scenes))
        .route("/scenes/{name}", get(get_scene))
        .layer(cors)
        .with_state(state)
}

/// Serves until the process ends, purging idle sessions every minute.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let janitor = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            janitor.purge_expired();
        }
    });
    axum::serve(listener, router(state)).await
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> ballchain::Result<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

async fn solve(body: Bytes) -> ApiResult<Response> {
    let text = std::str::from_utf8(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let scenario: Scenario = Scenario::from_json(text)?;
    let reports: Vec<SolveReport> = blocking(move || ballchain::solve_scenario(&scenario)).await?;
    let limited = reports
        .iter()
        .any(|r| !r.converged && r.reason == ballchain::solver::ITERATION_LIMIT);
    let status = if limited {
        StatusCode::GATEWAY_TIMEOUT
    } else {
        StatusCode::OK
    };
    Ok((status, Json(reports)).into_response())
}

/// Body of `POST /sessions`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    /// Built-in scene name.
    #[serde(default)]
    pub scene: Option<String>,
    /// Inline scene, instead of `scene`.
    #[serde(default)]
    pub scene_file: Option<SceneFile>,
    /// Ball chain; defaults to the bench spheres.
    #[serde(default)]
    pub design: Option<DesignSelection>,
    #[serde(default)]
    pub settings: SessionSettings,
}

/// Full session state, as returned by `GET /sessions/{id}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub scene: SceneFile,
    pub design: BallChainDesign,
    pub settings: SessionSettings,
    pub state: LogEntry,
    pub log: Vec<LogEntry>,
}

impl SessionView {
    fn new(id: &str, s: &NavigationSession) -> Self {
        Self {
            id: id.into(),
            scene: s.scene.to_file(),
            design: s.design,
            settings: s.settings,
            state: s.last().clone(),
            log: s.log().to_vec(),
        }
    }
}

/// Response of `POST /sessions/{id}/step`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepView {
    pub id: String,
    pub state: LogEntry,
}

async fn create_session(
    State(app): State<AppState>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    app.purge_expired();
    let text = std::str::from_utf8(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let req: CreateSession = parse_json(text, "session request")?;
    let scene = match (&req.scene, &req.scene_file) {
        (Some(name), None) => {
            if !ChannelScene::builtin_names().contains(name) {
                return Err(ApiError::not_found(&format!("scene `{name}`")));
            }
            ChannelScene::builtin(name)?
        }
        (None, Some(file)) => ChannelScene::from_file(file)?,
        _ => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "give exactly one of `scene` and `scene_file`",
            ))
        }
    };
    let design = match &req.design {
        None => BallChainDesign::experimental(),
        Some(sel) => match sel.resolve()? {
            DesignSpec::BallChain(d) => d,
            _ => {
                return Err(ApiError::new(
                    StatusCode::BAD_REQUEST,
                    "sessions need a ball-chain design",
                ))
            }
        },
    };
    let settings = req.settings;
    let session = blocking(move || NavigationSession::new(scene, design, settings)).await?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let view = SessionView::new(&id, &session);
    let slot = Arc::new(Slot {
        session: Arc::new(tokio::sync::Mutex::new(session)),
        last_active: Mutex::new(Instant::now()),
    });
    app.sessions
        .lock()
        .expect("session table lock")
        .insert(id, slot);
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionView>> {
    app.purge_expired();
    let slot = app
        .slot(&id)
        .ok_or_else(|| ApiError::not_found(&format!("session `{id}`")))?;
    slot.touch();
    let guard = slot.session.lock().await;
    Ok(Json(SessionView::new(&id, &guard)))
}

async fn step_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<StepView>> {
    app.purge_expired();
    let slot = app
        .slot(&id)
        .ok_or_else(|| ApiError::not_found(&format!("session `{id}`")))?;
    let text = std::str::from_utf8(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let command: Command = parse_json(text, "command")?;
    let guard = slot.session.clone().try_lock_owned().map_err(|_| {
        ApiError::new(
            StatusCode::CONFLICT,
            format!("session `{id}` is busy with another step"),
        )
    })?;
    slot.touch();
    let state = blocking(move || {
        let mut session = guard;
        session.step(command).cloned()
    })
    .await?;
    slot.touch();
    Ok(Json(StepView { id, state }))
}

async fn list_scenes() -> ApiResult<Json<Vec<SceneFile>>> {
    let scenes = ChannelScene::builtin_names()
        .iter()
        .map(|n| ChannelScene::builtin(n).map(|s| s.to_file()))
        .collect::<ballchain::Result<Vec<_>>>()?;
    Ok(Json(scenes))
}

async fn get_scene(Path(name): Path<String>) -> ApiResult<Json<SceneFile>> {
    if !ChannelScene::builtin_names().contains(&name) {
        return Err(ApiError::not_found(&format!("scene `{name}`")));
    }
    Ok(Json(ChannelScene::builtin(&name)?.to_file()))
}

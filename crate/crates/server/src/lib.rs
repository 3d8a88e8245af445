//! JSON endpoints and the per-session WebSocket stream around one [`Session`].
//!
//! The session sits behind a mutex and every command runs to completion under it, so
//! a pause always lands between motions. Frames the session emits are fanned out to
//! the stream. A background driver executes one motion per tick and aborts a
//! demonstration whose stream has gone quiet.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hrc_core::library::SkillRecord;
use hrc_core::planner::Plan;
use hrc_core::session::{ClientFrame, Command, LogLevel, Phase, ServerFrame, Session, SessionError, SessionState};
use hrc_core::Scene;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::broadcast;
use tokio::task::JoinHandle;

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    /// Pause between executed motions.
    pub tick_interval: Duration,
    /// Wall-clock silence after which a demonstration is aborted.
    pub stream_gap: Duration,
    /// Frames buffered per stream client before it is resynchronized.
    pub frame_buffer: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { tick_interval: Duration::from_millis(100), stream_gap: Duration::from_secs(2), frame_buffer: 1024 }
    }
}

struct Shared {
    session: Mutex<Session>,
    frames: broadcast::Sender<ServerFrame>,
    stream_open: AtomicBool,
    last_sample: Mutex<Instant>,
    config: ServerConfig,
}

/// Handle shared by the routes and the driver.
#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(session: Session, config: ServerConfig) -> Self {
        let (frames, _) = broadcast::channel(config.frame_buffer.max(1));
        AppState(Arc::new(Shared {
            session: Mutex::new(session),
            frames,
            stream_open: AtomicBool::new(false),
            last_sample: Mutex::new(Instant::now()),
            config,
        }))
    }

    pub fn config(&self) -> &ServerConfig {
        &self.0.config
    }

    fn lock(&self) -> MutexGuard<'_, Session> {
        self.0.session.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Reads the session without changing it.
    pub fn with_session<R>(&self, f: impl FnOnce(&Session) -> R) -> R {
        f(&self.lock())
    }

    pub fn subscribe(&self) -> broadcast::Receiver<ServerFrame> {
        self.0.frames.subscribe()
    }

    fn publish(&self, s: &mut Session) {
        for f in s.drain_frames() {
            // No subscribers is fine; the state is still served over HTTP.
            let _ = self.0.frames.send(f);
        }
    }

    /// Applies a command and publishes whatever it emitted.
    pub fn apply(&self, command: Command) -> Result<SessionState, SessionError> {
        let mut s = self.lock();
        if matches!(command, Command::StartDemo | Command::Sample(_)) {
            *self.0.last_sample.lock().unwrap_or_else(|e| e.into_inner()) = Instant::now();
        }
        let r = s.handle(command);
        self.publish(&mut s);
        r.map(|_| s.state())
    }

    /// One driver step: runs the next motion, or aborts a stalled demonstration.
    pub fn step(&self) {
        let mut s = self.lock();
        match s.phase() {
            Phase::Executing => {
                let _ = s.handle(Command::Tick);
            }
            Phase::Demonstrating => {
                let quiet = self.0.last_sample.lock().unwrap_or_else(|e| e.into_inner()).elapsed();
                if quiet > self.0.config.stream_gap {
                    let _ = s.handle(Command::StreamTimeout);
                }
            }
            _ => {}
        }
        self.publish(&mut s);
    }

    /// Calls [`AppState::step`] every tick until the runtime shuts down.
    pub fn spawn_driver(&self) -> JoinHandle<()> {
        let state = self.clone();
        tokio::spawn(async move {
            let mut every = tokio::time::interval(state.0.config.tick_interval);
            every.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                every.tick().await;
                state.step();
            }
        })
    }
}

/// Error body: `{error, phase}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub phase: String,
}

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(state: &AppState, e: SessionError) -> Self {
        let status = match e {
            SessionError::IllegalPhase { .. } | SessionError::CommitRefused(_) => StatusCode::CONFLICT,
            SessionError::UnknownRecording(_) => StatusCode::NOT_FOUND,
            SessionError::EmptyTask | SessionError::BadSample(_) | SessionError::BadAnswer(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let phase = state.with_session(|s| s.phase().to_string());
        ApiError { status, body: ErrorBody { error: e.to_string(), phase } }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult = Result<Json<SessionState>, ApiError>;

fn run(state: &AppState, command: Command) -> ApiResult {
    state.apply(command).map(Json).map_err(|e| ApiError::new(state, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskRequest {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClarifyRequest {
    pub answer: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommitRequest {
    pub recording_id: String,
    #[serde(default)]
    pub name: Option<String>,
    /// Confirms replacing a skill of the same name.
    #[serde(default)]
    pub replace: bool,
}

async fn task(State(st): State<AppState>, Json(r): Json<TaskRequest>) -> ApiResult {
    run(&st, Command::Submit { text: r.text })
}

async fn clarify(State(st): State<AppState>, Json(r): Json<ClarifyRequest>) -> ApiResult {
    run(&st, Command::Clarify { answer: r.answer })
}

async fn commit(State(st): State<AppState>, Json(r): Json<CommitRequest>) -> ApiResult {
    run(&st, Command::Commit { recording_id: r.recording_id, name: r.name, replace: r.replace })
}

fn simple(command: Command) -> impl Fn(State<AppState>) -> std::future::Ready<ApiResult> + Clone {
    move |State(st)| std::future::ready(run(&st, command.clone()))
}

async fn plan(State(st): State<AppState>) -> Json<Option<Plan>> {
    Json(st.with_session(|s| s.plan().cloned()))
}

async fn scene(State(st): State<AppState>) -> Json<Scene> {
    Json(st.with_session(|s| s.scene().clone()))
}

async fn library(State(st): State<AppState>) -> Json<Vec<SkillRecord>> {
    Json(st.with_session(|s| s.library().skills().cloned().collect()))
}

async fn session_state(State(st): State<AppState>) -> Json<SessionState> {
    Json(st.with_session(Session::state))
}

async fn events(State(st): State<AppState>) -> impl IntoResponse {
    let log = st.with_session(|s| s.simulator().event_log_jsonl());
    ([("content-type", "application/jsonl")], log)
}

async fn stream(State(st): State<AppState>, ws: WebSocketUpgrade) -> Response {
    if st.0.stream_open.swap(true, Ordering::SeqCst) {
        let body = ErrorBody {
            error: "a stream is already open for this session".into(),
            phase: st.with_session(|s| s.phase().to_string()),
        };
        return (StatusCode::CONFLICT, Json(body)).into_response();
    }
    ws.on_upgrade(move |socket| async move {
        serve_stream(&st, socket).await;
        st.0.stream_open.store(false, Ordering::SeqCst);
    })
}

fn encode(f: &ServerFrame) -> Message {
    Message::Text(serde_json::to_string(f).expect("frames serialize").into())
}

async fn serve_stream(st: &AppState, mut socket: WebSocket) {
    let mut frames = st.subscribe();
    let snapshot = ServerFrame::State(Box::new(st.with_session(Session::state)));
    if socket.send(encode(&snapshot)).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            out = frames.recv() => {
                let frame = match out {
                    Ok(f) => f,
                    // Missed frames are replaced by a fresh snapshot.
                    Err(broadcast::error::RecvError::Lagged(_)) => ServerFrame::State(Box::new(st.with_session(Session::state))),
                    Err(broadcast::error::RecvError::Closed) => return,
                };
                if socket.send(encode(&frame)).await.is_err() {
                    return;
                }
            }
            msg = socket.recv() => {
                let text = match msg {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                let reply = match serde_json::from_str::<ClientFrame>(&text) {
                    Ok(ClientFrame::DemoSample(s)) => st.apply(Command::Sample(s)).err().map(|e| e.to_string()),
                    Err(e) => Some(format!("bad frame: {e}")),
                };
                if let Some(message) = reply {
                    let f = ServerFrame::Log { level: LogLevel::Error, message };
                    if socket.send(encode(&f)).await.is_err() {
                        return;
                    }
                }
            }
        }
    }
}

/// All routes. The driver is not started; see [`serve`].
pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/task", post(task))
        .route("/pause", post(simple(Command::Pause)))
        .route("/resume", post(simple(Command::Resume)))
        .route("/clarify", post(clarify))
        .route("/skill/commit", post(commit))
        .route("/skill/discard", post(simple(Command::Discard)))
        .route("/demo/start", post(simple(Command::StartDemo)))
        .route("/demo/finish", post(simple(Command::FinishDemo)))
        .route("/abort", post(simple(Command::Abort)))
        .route("/reset", post(simple(Command::Reset)))
        .route("/plan", get(plan))
        .route("/scene", get(scene))
        .route("/library", get(library))
        .route("/state", get(session_state))
        .route("/events", get(events))
        .route("/stream", get(stream))
        .with_state(state)
}

/// Serves `state` on `listener` with the driver running.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    let driver = state.spawn_driver();
    let r = axum::serve(listener, router(state)).await;
    driver.abort();
    r
}

/// Binds `addr` and serves until the process ends.
pub async fn bind_and_serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    serve(TcpListener::bind(addr).await?, state).await
}

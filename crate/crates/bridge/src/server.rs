//! HTTP and WebSocket front end.
//!
//! Routes:
//! - `GET /health`
//! - `POST /sessions`, `GET|DELETE /sessions/{id}`
//! - `POST /sessions/{id}/step`, `/pace`, `/feedback`
//! - `GET /sessions/{id}/events[?from=N]` (socket upgrade; one JSON event per text frame, newline-terminated)
//! - `GET /sessions/{id}/report` (line-delimited episode record)
//!
//! Anything else is served from the static directory when one is configured.

use std::collections::BTreeMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, Mutex};
use tower_http::services::ServeDir;
use tracing::{info, warn};

use crate::error::{BridgeError, Result};
use crate::protocol::{check_version, ClientMessage, Event, EventBody, SessionRequest, PROTOCOL_VERSION};
use crate::session::{spawn_session, Session, SessionHandle};

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    /// Episode records of every session are written here on shutdown or delete.
    pub records_dir: Option<PathBuf>,
    /// Built dashboard bundle.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            addr: SocketAddr::from(([127, 0, 0, 1], 8787)),
            records_dir: None,
            static_dir: None,
        }
    }
}

struct AppState {
    sessions: Mutex<BTreeMap<String, SessionHandle>>,
    next_id: AtomicU64,
    records_dir: Option<PathBuf>,
}

impl AppState {
    async fn session(&self, id: &str) -> Result<SessionHandle> {
        self.sessions.lock().await.get(id).cloned().ok_or_else(|| BridgeError::UnknownSession(id.to_string()))
    }

    async fn flush(&self, id: &str, handle: &SessionHandle) -> Result<()> {
        let record = handle.shutdown().await?;
        if let Some(dir) = &self.records_dir {
            let path = dir.join(format!("{id}.ndjson"));
            std::fs::create_dir_all(dir).map_err(|source| BridgeError::Io { path: dir.clone(), source })?;
            std::fs::write(&path, record.to_ndjson_string()).map_err(|source| BridgeError::Io { path, source })?;
        }
        Ok(())
    }
}

impl IntoResponse for BridgeError {
    fn into_response(self) -> Response {
        let status = match &self {
            BridgeError::Protocol(_) | BridgeError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
            BridgeError::UnknownSession(_) => StatusCode::NOT_FOUND,
            BridgeError::SessionFinished(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = json!({ "version": PROTOCOL_VERSION, "type": "error", "message": self.to_string() });
        (status, Json(body)).into_response()
    }
}

/// Parse a JSON body, reporting malformed input as a protocol error.
fn body<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| BridgeError::Protocol(e.to_string()))
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({
        "version": PROTOCOL_VERSION,
        "service": env!("CARGO_PKG_NAME"),
        "service_version": env!("CARGO_PKG_VERSION"),
    }))
}

async fn create_session(State(app): State<Arc<AppState>>, raw: axum::body::Bytes) -> Result<Response> {
    let req: SessionRequest = body(&raw)?;
    let id = format!("s{}", app.next_id.fetch_add(1, Ordering::SeqCst) + 1);
    let sid = id.clone();
    let session = tokio::task::spawn_blocking(move || Session::new(sid, req))
        .await
        .map_err(|_| BridgeError::Closed)??;
    let handle = spawn_session(session);
    let status = handle.status().await?;
    app.sessions.lock().await.insert(id.clone(), handle);
    info!(session = %id, "session created");
    Ok((StatusCode::CREATED, Json(status)).into_response())
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response> {
    Ok(Json(app.session(&id).await?.status().await?).into_response())
}

async fn delete_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response> {
    let handle = app.sessions.lock().await.remove(&id).ok_or_else(|| BridgeError::UnknownSession(id.clone()))?;
    app.flush(&id, &handle).await?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepBody {
    version: u32,
    #[serde(default)]
    count: Option<usize>,
}

async fn step_session(State(app): State<Arc<AppState>>, Path(id): Path<String>, raw: axum::body::Bytes) -> Result<Response> {
    let b: StepBody = body(&raw)?;
    check_version(b.version)?;
    let events = app.session(&id).await?.step(b.count.unwrap_or(1)).await?;
    Ok(Json(json!({ "version": PROTOCOL_VERSION, "events": events })).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PaceBody {
    version: u32,
    steps_per_second: Option<f64>,
}

async fn pace_session(State(app): State<Arc<AppState>>, Path(id): Path<String>, raw: axum::body::Bytes) -> Result<Response> {
    let b: PaceBody = body(&raw)?;
    check_version(b.version)?;
    let handle = app.session(&id).await?;
    handle.pace(b.steps_per_second).await?;
    Ok(Json(handle.status().await?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FeedbackBody {
    version: u32,
    value: i64,
}

async fn feedback_session(State(app): State<Arc<AppState>>, Path(id): Path<String>, raw: axum::body::Bytes) -> Result<Response> {
    let b: FeedbackBody = body(&raw)?;
    check_version(b.version)?;
    Ok(Json(app.session(&id).await?.feedback(b.value).await?).into_response())
}

async fn report_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response> {
    let record = app.session(&id).await?.report().await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], record.to_ndjson_string()).into_response())
}

#[derive(Deserialize)]
struct EventsQuery {
    from: Option<usize>,
}

async fn events_socket(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    ws: WebSocketUpgrade,
) -> Result<Response> {
    let handle = app.session(&id).await?;
    Ok(ws.on_upgrade(move |socket| drive_socket(socket, handle, q.from)))
}

async fn handle_client_line(handle: &SessionHandle, line: &str) -> Option<Event> {
    let reply = async {
        match ClientMessage::parse(line)? {
            ClientMessage::Feedback { value, .. } => handle.feedback(value).await.map(Some),
            ClientMessage::Step { count, .. } => handle.step(count).await.map(|_| None),
            ClientMessage::Pace { steps_per_second, .. } => handle.pace(steps_per_second).await.map(|_| None),
            ClientMessage::Ack { step, .. } => handle.ack(step).await.map(|_| None),
        }
    };
    match reply.await {
        Ok(e) => e,
        Err(e) => Some(Event::new(&handle.id, EventBody::Error { message: e.to_string() })),
    }
}

/// Replays logged events, then forwards live ones. A lagging client is re-synchronised
/// from its last delivered step so the feed stays gap-free.
async fn drive_socket(socket: WebSocket, handle: SessionHandle, from: Option<usize>) {
    let _guard = handle.client_guard();
    let (mut sink, mut stream) = socket.split();
    let Ok((mut backlog, mut live)) = handle.subscribe(from).await else { return };
    let mut next = from.unwrap_or(0);
    loop {
        for e in backlog.drain(..) {
            if let Some(s) = e.step() {
                next = next.max(s);
            }
            if sink.send(Message::Text(e.to_line().into())).await.is_err() {
                return;
            }
        }
        tokio::select! {
            msg = stream.next() => match msg {
                Some(Ok(Message::Text(text))) => {
                    for line in text.lines().filter(|l| !l.trim().is_empty()) {
                        if let Some(reply) = handle_client_line(&handle, line).await {
                            backlog.push(reply);
                        }
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
            ev = live.recv() => match ev {
                Ok(e) => backlog.push(e),
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    warn!(session = %handle.id, skipped = n, "client lagged; replaying");
                    match handle.subscribe(Some(next)).await {
                        Ok((replay, rx)) => {
                            // events for `next` itself may already have been sent
                            backlog = replay.into_iter().filter(|e| e.step().is_some_and(|s| s > next) || matches!(e.body, EventBody::Finished { .. })).collect();
                            live = rx;
                        }
                        Err(_) => return,
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
        }
    }
}

fn router(app: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let r = Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/step", post(step_session))
        .route("/sessions/{id}/pace", post(pace_session))
        .route("/sessions/{id}/feedback", post(feedback_session))
        .route("/sessions/{id}/report", get(report_session))
        .route("/sessions/{id}/events", get(events_socket))
        .with_state(app);
    match static_dir {
        Some(dir) => r.fallback_service(ServeDir::new(dir)),
        None => r,
    }
}

/// A bound but not yet running service.
pub struct Server {
    listener: TcpListener,
    state: Arc<AppState>,
    static_dir: Option<PathBuf>,
}

impl Server {
    pub async fn bind(config: ServeConfig) -> Result<Self> {
        let listener = TcpListener::bind(config.addr)
            .await
            .map_err(|source| BridgeError::Bind { addr: config.addr, source })?;
        Ok(Self {
            listener,
            state: Arc::new(AppState {
                sessions: Mutex::new(BTreeMap::new()),
                next_id: AtomicU64::new(0),
                records_dir: config.records_dir,
            }),
            static_dir: config.static_dir,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Serve until `shutdown` resolves, then write every session's record.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<()> {
        let addr = self.local_addr();
        let app = router(self.state.clone(), self.static_dir);
        axum::serve(self.listener, app)
            .with_graceful_shutdown(shutdown)
            .await
            .map_err(|source| BridgeError::Bind { addr, source })?;
        let sessions = std::mem::take(&mut *self.state.sessions.lock().await);
        for (id, handle) in sessions {
            self.state.flush(&id, &handle).await?;
        }
        Ok(())
    }
}

/// Bind and serve until ctrl-c.
pub async fn serve(config: ServeConfig) -> Result<()> {
    let server = Server::bind(config).await?;
    info!(addr = %server.local_addr(), "listening");
    server
        .run(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

//! HTTP session API for live play and transcript export.
//!
//! Player-facing responses carry only instruction text, rendered feedback,
//! status and move counts. Full transcripts with ground truth are available
//! through the token-guarded export.

pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Duration, Utc};
use haunted_core::engine::{Scenario, Status};
use haunted_core::messages::{
    parse_command_with, InstructionVariant, MessageCatalog, ParseMode, DEFAULT_LOCALE,
};
use haunted_core::transcript::{AgentInfo, OutcomeStatus, Recorder, Transcript};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;
use tokio::sync::{Mutex, RwLock};

use crate::store::{group_events, Event, EventLog, StoreError};

pub const DEFAULT_TTL_HOURS: i64 = 24;

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Clone)]
pub struct ServiceConfig {
    pub store_path: PathBuf,
    /// Export is refused when unset.
    pub admin_token: Option<String>,
    pub default_locale: String,
    pub ttl: Duration,
    pub clock: Clock,
}

impl ServiceConfig {
    pub fn new(store_path: impl Into<PathBuf>) -> ServiceConfig {
        ServiceConfig {
            store_path: store_path.into(),
            admin_token: None,
            default_locale: DEFAULT_LOCALE.to_owned(),
            ttl: Duration::hours(DEFAULT_TTL_HOURS),
            clock: Arc::new(Utc::now),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("default locale: {0}")]
    Locale(#[from] haunted_core::messages::MessageError),
    #[error("binding {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server: {0}")]
    Serve(#[source] std::io::Error),
}

/// Status as shown to players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    InProgress,
    Escaped,
    GhostDeath,
    OutOfMoves,
    /// Expired before finishing.
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default)]
    pub locale: Option<String>,
    #[serde(default)]
    pub meta: Option<Map<String, Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub session_id: String,
    pub instructions_text: String,
    pub move_limit: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveRequest {
    pub input: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveResponse {
    pub feedback_text: String,
    pub status: SessionStatus,
    pub moves_used: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub status: SessionStatus,
    pub moves_used: u32,
    pub feedback_history: Vec<String>,
}

/// One exported line: the transcript plus any participant fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRecord {
    #[serde(flatten)]
    pub transcript: Transcript,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Map<String, Value>>,
}

struct Session {
    id: String,
    created_at: DateTime<Utc>,
    variant: InstructionVariant,
    meta: Option<Map<String, Value>>,
    recorder: Recorder,
    frozen: bool,
}

impl Session {
    fn status(&self) -> SessionStatus {
        if self.frozen {
            return SessionStatus::Incomplete;
        }
        match self.recorder.game().state().status {
            Status::InProgress => SessionStatus::InProgress,
            Status::Escaped => SessionStatus::Escaped,
            Status::GhostDeath => SessionStatus::GhostDeath,
            Status::OutOfMoves => SessionStatus::OutOfMoves,
        }
    }

    fn moves_used(&self) -> u32 {
        self.recorder.game().state().moves_used
    }

    fn view(&self) -> SessionView {
        SessionView {
            status: self.status(),
            moves_used: self.moves_used(),
            feedback_history: self
                .recorder
                .moves()
                .iter()
                .map(|m| m.rendered_feedback.clone())
                .collect(),
        }
    }

    fn export(&self) -> ExportRecord {
        let mut transcript =
            self.recorder
                .clone()
                .finish(self.id.clone(), AgentInfo::human(), self.variant);
        transcript.created_at = Some(self.created_at.to_rfc3339());
        if self.frozen {
            transcript.outcome.status = OutcomeStatus::Incomplete;
        }
        ExportRecord {
            transcript,
            meta: self.meta.clone(),
        }
    }

    fn expired(&self, now: DateTime<Utc>, ttl: Duration) -> bool {
        !self.frozen && self.status() == SessionStatus::InProgress && now - self.created_at >= ttl
    }
}

#[derive(Default)]
struct Registry {
    order: Vec<String>,
    sessions: HashMap<String, Arc<Mutex<Session>>>,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServiceConfig,
    log: EventLog,
    registry: RwLock<Registry>,
    /// Writers hold it shared, export holds it exclusively for a consistent snapshot.
    snapshot: RwLock<()>,
}

impl AppState {
    /// Opens the store and rebuilds every session from its events.
    pub fn open(config: ServiceConfig) -> Result<AppState, ServiceError> {
        MessageCatalog::for_locale(&config.default_locale)?;
        let (log, events) = EventLog::open(&config.store_path)?;
        let mut registry = Registry::default();
        for (id, events) in group_events(events) {
            let session = rebuild(&id, events)?;
            registry.order.push(id.clone());
            registry.sessions.insert(id, Arc::new(Mutex::new(session)));
        }
        log::info!(
            "loaded {} sessions from {}",
            registry.order.len(),
            log.path().display()
        );
        Ok(AppState {
            inner: Arc::new(Inner {
                config,
                log,
                registry: RwLock::new(registry),
                snapshot: RwLock::new(()),
            }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    fn now(&self) -> DateTime<Utc> {
        (self.inner.config.clock)()
    }

    async fn session(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.inner.registry.read().await.sessions.get(id).cloned()
    }

    /// Freezes `session` if its time is up. Caller holds the session lock.
    fn expire(&self, session: &mut Session) -> Result<(), StoreError> {
        let now = self.now();
        if session.expired(now, self.inner.config.ttl) {
            self.inner.log.append(&Event::Frozen {
                session_id: session.id.clone(),
                at: now,
            })?;
            session.frozen = true;
        }
        Ok(())
    }

    /// Every session as a transcript line, taken as one consistent snapshot.
    pub async fn export(&self) -> Result<Vec<ExportRecord>, StoreError> {
        let _all = self.inner.snapshot.write().await;
        let sessions: Vec<Arc<Mutex<Session>>> = {
            let registry = self.inner.registry.read().await;
            registry
                .order
                .iter()
                .filter_map(|id| registry.sessions.get(id).cloned())
                .collect()
        };
        let mut out = Vec::with_capacity(sessions.len());
        for s in sessions {
            let mut s = s.lock().await;
            self.expire(&mut s)?;
            out.push(s.export());
        }
        Ok(out)
    }
}

fn rebuild(id: &str, events: Vec<Event>) -> Result<Session, StoreError> {
    let inconsistent = |detail: String| StoreError::Inconsistent {
        session: id.to_owned(),
        detail,
    };
    let mut events = events.into_iter();
    let Some(Event::Created {
        created_at,
        variant,
        locale,
        meta,
        ..
    }) = events.next()
    else {
        return Err(inconsistent("first event is not a creation".into()));
    };
    let catalog = MessageCatalog::for_locale(&locale).map_err(|e| inconsistent(e.to_string()))?;
    let recorder =
        Recorder::new(Scenario::canonical(), catalog).map_err(|e| inconsistent(e.to_string()))?;
    let mut session = Session {
        id: id.to_owned(),
        created_at,
        variant,
        meta,
        recorder,
        frozen: false,
    };
    for event in events {
        match event {
            Event::Moved { record, .. } => {
                let (replayed, _) = session
                    .recorder
                    .play(record.command)
                    .map_err(|e| inconsistent(format!("move {}: {e}", record.index)))?;
                if *replayed != record {
                    return Err(inconsistent(format!(
                        "move {} replays differently",
                        record.index
                    )));
                }
            }
            Event::Frozen { .. } => session.frozen = true,
            Event::Created { .. } => return Err(inconsistent("created twice".into())),
        }
    }
    Ok(session)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn internal(e: impl std::fmt::Display) -> Response {
    log::error!("{e}");
    error(StatusCode::INTERNAL_SERVER_ERROR, "internal error")
}

async fn create_session(
    State(state): State<AppState>,
    body: Option<Json<CreateSessionRequest>>,
) -> Response {
    let request = body.map(|Json(b)| b).unwrap_or(CreateSessionRequest {
        variant: None,
        locale: None,
        meta: None,
    });
    let variant = match request
        .variant
        .as_deref()
        .map(str::parse::<InstructionVariant>)
    {
        None => InstructionVariant::Original,
        Some(Ok(v)) => v,
        Some(Err(e)) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let locale = request
        .locale
        .unwrap_or_else(|| state.inner.config.default_locale.clone());
    let catalog = match MessageCatalog::for_locale(&locale) {
        Ok(c) => c,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let scenario = Scenario::canonical();
    let move_limit = scenario.move_limit;
    let instructions_text = catalog.instructions(variant);
    let recorder = match Recorder::new(scenario, catalog) {
        Ok(r) => r,
        Err(e) => return internal(e),
    };
    let id = uuid::Uuid::new_v4().simple().to_string();
    let created_at = state.now();

    let _writer = state.inner.snapshot.read().await;
    let event = Event::Created {
        session_id: id.clone(),
        created_at,
        variant,
        locale,
        meta: request.meta.clone(),
    };
    if let Err(e) = state.inner.log.append(&event) {
        return internal(e);
    }
    let session = Session {
        id: id.clone(),
        created_at,
        variant,
        meta: request.meta,
        recorder,
        frozen: false,
    };
    let mut registry = state.inner.registry.write().await;
    registry.order.push(id.clone());
    registry
        .sessions
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    Json(CreateSessionResponse {
        session_id: id,
        instructions_text,
        move_limit,
    })
    .into_response()
}

async fn post_move(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(request): Json<MoveRequest>,
) -> Response {
    let Some(session) = state.session(&id).await else {
        return error(StatusCode::NOT_FOUND, "unknown session");
    };
    let _writer = state.inner.snapshot.read().await;
    let mut session = session.lock().await;
    if let Err(e) = state.expire(&mut session) {
        return internal(e);
    }
    if session.status() != SessionStatus::InProgress {
        return error(StatusCode::CONFLICT, "session is finished");
    }
    let Some(command) = parse_command_with(&request.input, session.variant, ParseMode::Strict)
    else {
        return error(StatusCode::UNPROCESSABLE_ENTITY, "unrecognised move");
    };
    let before = session.recorder.clone();
    let record = match session.recorder.play(command) {
        Ok((record, _)) => record.clone(),
        Err(e) => return internal(e),
    };
    let event = Event::Moved {
        session_id: id,
        record: record.clone(),
    };
    if let Err(e) = state.inner.log.append(&event) {
        session.recorder = before;
        return internal(e);
    }
    Json(MoveResponse {
        feedback_text: record.rendered_feedback,
        status: session.status(),
        moves_used: session.moves_used(),
    })
    .into_response()
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(session) = state.session(&id).await else {
        return error(StatusCode::NOT_FOUND, "unknown session");
    };
    let _writer = state.inner.snapshot.read().await;
    let mut session = session.lock().await;
    if let Err(e) = state.expire(&mut session) {
        return internal(e);
    }
    Json(session.view()).into_response()
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    token: Option<String>,
}

fn token_matches(expected: &str, given: &str) -> bool {
    expected.len() == given.len()
        && expected
            .bytes()
            .zip(given.bytes())
            .fold(0u8, |acc, (a, b)| acc | (a ^ b))
            == 0
}

async fn export(State(state): State<AppState>, Query(query): Query<ExportQuery>) -> Response {
    let authorised = match (&state.inner.config.admin_token, &query.token) {
        (Some(expected), Some(given)) => token_matches(expected, given),
        _ => false,
    };
    if !authorised {
        return error(StatusCode::UNAUTHORIZED, "bad token");
    }
    let records = match state.export().await {
        Ok(r) => r,
        Err(e) => return internal(e),
    };
    let mut body = String::new();
    for r in &records {
        body.push_str(&serde_json::to_string(r).expect("export records serialize"));
        body.push('\n');
    }
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/moves", post(post_move))
        .route("/export", get(export))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), ServiceError> {
    let state = AppState::open(config)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { addr, source })?;
    log::info!(
        "listening on {}",
        listener.local_addr().map_err(ServiceError::Serve)?
    );
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServiceError::Serve)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_comparison() {
        assert!(token_matches("abc", "abc"));
        assert!(!token_matches("abc", "abd"));
        assert!(!token_matches("abc", "ab"));
    }

    #[test]
    fn statuses_serialize_snake_case() {
        assert_eq!(
            serde_json::to_string(&SessionStatus::OutOfMoves).unwrap(),
            "\"out_of_moves\""
        );
        assert_eq!(
            serde_json::to_string(&SessionStatus::InProgress).unwrap(),
            "\"in_progress\""
        );
    }
}

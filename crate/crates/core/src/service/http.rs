//! JSON session API.
//!
//! | method | path                       | body          | reply                      |
//! |--------|----------------------------|---------------|----------------------------|
//! | POST   | `/session`                 | `{mode?}`     | 201 `{id, mode}`           |
//! | POST   | `/session/{id}/utterance`  | `{text}`      | 200 system response        |
//! | GET    | `/session/{id}/state`      |               | 200 session export         |
//! | DELETE | `/session/{id}`            |               | 204                        |
//! | GET    | `/health`                  |               | 200 `{status, summary}`    |

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::dialogue::Session;
use crate::engine::Engine;
use crate::reasoning::Mode;

pub const DEFAULT_TTL: Duration = Duration::from_secs(30 * 60);

#[derive(Debug)]
pub struct SessionHandle {
    pub session: Session,
    pub created: SystemTime,
    last_active: Instant,
}

/// Live sessions. Each session has its own lock so requests for one
/// session are serialized while others proceed.
#[derive(Debug)]
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Arc<Mutex<SessionHandle>>>>,
    ttl: Duration,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        SessionStore { sessions: Mutex::new(HashMap::new()), ttl }
    }

    pub fn insert(&self, session: Session) -> String {
        let id = session.id.clone();
        let handle = SessionHandle { session, created: SystemTime::now(), last_active: Instant::now() };
        let mut map = self.sessions.lock();
        self.purge_locked(&mut map);
        map.insert(id.clone(), Arc::new(Mutex::new(handle)));
        id
    }

    /// Live session by id; an expired one is dropped and reported absent.
    pub fn get(&self, id: &str) -> Option<Arc<Mutex<SessionHandle>>> {
        let mut map = self.sessions.lock();
        let handle = map.get(id)?.clone();
        let expired = handle.lock().last_active.elapsed() > self.ttl;
        if expired {
            map.remove(id);
            return None;
        }
        Some(handle)
    }

    pub fn remove(&self, id: &str) -> bool {
        self.sessions.lock().remove(id).is_some()
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn purge_locked(&self, map: &mut HashMap<String, Arc<Mutex<SessionHandle>>>) {
        map.retain(|_, h| h.lock().last_active.elapsed() <= self.ttl);
    }
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub sessions: Arc<SessionStore>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>, ttl: Duration) -> Self {
        AppState { engine, sessions: Arc::new(SessionStore::new(ttl)) }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/session", post(create_session))
        .route("/session/{id}/utterance", post(utterance))
        .route("/session/{id}/state", get(state_of))
        .route("/session/{id}", axum::routing::delete(delete_session))
        .with_state(state)
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"error": self.1}))).into_response()
    }
}

fn not_found(id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("no live session `{id}`"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    mode: Option<Mode>,
}

#[derive(Debug, Deserialize)]
struct UtteranceBody {
    text: String,
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    Json(json!({"status": "ok", "summary": state.engine.summary(), "sessions": state.sessions.len()}))
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let mode = if body.iter().all(u8::is_ascii_whitespace) {
        state.engine.settings().walk.mode
    } else {
        parse_body::<CreateBody>(&body)?.mode.unwrap_or(state.engine.settings().walk.mode)
    };
    let id = uuid::Uuid::new_v4().simple().to_string();
    state.sessions.insert(state.engine.new_session(id.clone(), mode));
    Ok((StatusCode::CREATED, Json(json!({"id": id, "mode": mode}))))
}

async fn utterance(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let body: UtteranceBody = parse_body(&body)?;
    let handle = state.sessions.get(&id).ok_or_else(|| not_found(&id))?;
    let mut h = handle.lock();
    h.last_active = Instant::now();
    let response = state
        .engine
        .advance(&mut h.session, &body.text)
        .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    Ok(Json(serde_json::to_value(response).expect("response serializes")))
}

async fn state_of(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let handle = state.sessions.get(&id).ok_or_else(|| not_found(&id))?;
    let h = handle.lock();
    let created = h.created.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut v = h.session.to_json();
    v["created_unix"] = json!(created);
    v["idle_secs"] = json!(h.last_active.elapsed().as_secs());
    Ok(Json(v))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    if state.sessions.remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(not_found(&id))
    }
}

/// Serves until ctrl-c.
pub async fn serve(state: AppState, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

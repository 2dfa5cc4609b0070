//! HTTP questionnaire service: one in-memory session per respondent.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use adaptq::artifact::ModelArtifact;
use adaptq::session::{Session, SessionError, SessionStatus};
use adaptq::trace::EpisodeTrace;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Value};

pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(30 * 60);

struct Entry {
    session: Session,
    created_at: Instant,
}

#[derive(Clone)]
pub struct AppState {
    model: Arc<ModelArtifact>,
    sessions: Arc<RwLock<HashMap<String, Arc<Mutex<Entry>>>>>,
    ttl: Duration,
}

impl AppState {
    pub fn new(model: ModelArtifact, ttl: Duration) -> Self {
        Self {
            model: Arc::new(model),
            sessions: Arc::default(),
            ttl,
        }
    }

    fn lookup(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    /// Drops sessions that expired more than one TTL ago.
    fn sweep(&self) {
        let horizon = self.ttl * 2;
        self.sessions
            .write()
            .expect("session map poisoned")
            .retain(|_, e| e.lock().is_ok_and(|e| e.created_at.elapsed() < horizon));
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route(
            "/healthz",
            get(|| async { Json(json!({ "status": "ok" })) }),
        )
        .route("/v1/model", get(model_info))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/:id", get(get_session).delete(delete_session))
        .route("/v1/sessions/:id/answer", post(answer))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            message: format!("unknown session {id}"),
        }
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::CONFLICT,
            message: message.into(),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::BadRequest(m) => Self::bad_request(m),
            SessionError::Conflict(m) => Self::conflict(m),
            SessionError::Engine(e) => Self {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                message: e.to_string(),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

#[derive(Debug, Serialize)]
struct PendingQuestion {
    index: usize,
    name: String,
}

#[derive(Debug, Serialize)]
struct GuessView {
    #[serde(skip_serializing_if = "Option::is_none")]
    p_positive: Option<f64>,
    distribution: Vec<f64>,
    predicted_class: usize,
}

#[derive(Debug, Serialize)]
struct SessionView {
    session_id: String,
    status: &'static str,
    pending_question: Option<PendingQuestion>,
    guess: Option<GuessView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<EpisodeTrace>,
}

fn view(
    id: &str,
    entry: &Entry,
    model: &ModelArtifact,
    ttl: Duration,
    with_trace: bool,
) -> SessionView {
    let expired = entry.created_at.elapsed() >= ttl;
    let (status, pending_question, guess) = match entry.session.status() {
        _ if expired => ("expired", None, None),
        SessionStatus::AwaitingAnswer(i) => (
            "awaiting_answer",
            Some(PendingQuestion {
                index: *i,
                name: model.feature_names[*i].clone(),
            }),
            None,
        ),
        SessionStatus::Guessed(g) => (
            "guessed",
            None,
            Some(GuessView {
                p_positive: (g.distribution.len() == 2).then(|| g.distribution[1]),
                distribution: g.distribution.clone(),
                predicted_class: g.predicted_class,
            }),
        ),
    };
    SessionView {
        session_id: id.to_string(),
        status,
        pending_question,
        guess,
        trace: with_trace.then(|| entry.session.trace().clone()),
    }
}

async fn model_info(State(state): State<AppState>) -> Json<Value> {
    let m = &state.model;
    Json(json!({
        "d": m.d,
        "n_classes": m.n_classes,
        "feature_names": m.feature_names,
        "forced_features": m.forced_names(),
        "k_features": m.k_features,
        "max_questions": m.max_steps(),
        "norm_stats": m.norm_stats,
    }))
}

fn parse_answers(body: &Value) -> Result<BTreeMap<String, f64>, ApiError> {
    let answers = body
        .get("answers")
        .and_then(Value::as_object)
        .ok_or_else(|| ApiError::bad_request("body must contain an \"answers\" object"))?;
    answers
        .iter()
        .map(|(k, v)| {
            v.as_f64()
                .map(|x| (k.clone(), x))
                .ok_or_else(|| ApiError::bad_request(format!("answer for {k:?} must be a number")))
        })
        .collect()
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<Value>, axum::extract::rejection::JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let Json(body) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let answers = parse_answers(&body)?;
    let session = Session::start(&state.model, &answers)?;
    state.sweep();
    let id = uuid::Uuid::new_v4().to_string();
    let entry = Entry {
        session,
        created_at: Instant::now(),
    };
    let out = view(&id, &entry, &state.model, state.ttl, false);
    state
        .sessions
        .write()
        .expect("session map poisoned")
        .insert(id, Arc::new(Mutex::new(entry)));
    Ok((StatusCode::CREATED, Json(out)))
}

async fn answer(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Value>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<SessionView>, ApiError> {
    let entry = state.lookup(&id)?;
    let Json(body) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let value = body
        .get("value")
        .and_then(Value::as_f64)
        .ok_or_else(|| ApiError::bad_request("body must be {\"value\": number}"))?;
    let mut entry = entry.lock().expect("session poisoned");
    if entry.created_at.elapsed() >= state.ttl {
        return Err(ApiError::conflict("session expired"));
    }
    entry.session.submit_answer(&state.model, value)?;
    Ok(Json(view(&id, &entry, &state.model, state.ttl, false)))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let entry = state.lookup(&id)?;
    let entry = entry.lock().expect("session poisoned");
    Ok(Json(view(&id, &entry, &state.model, state.ttl, true)))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> StatusCode {
    state
        .sessions
        .write()
        .expect("session map poisoned")
        .remove(&id);
    StatusCode::NO_CONTENT
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

//! HTTP chat service.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use lookahead_core::chat::{ChatEngine, ChatError, Outcome};
use lookahead_core::checkpoint;
use lookahead_core::corpus::GoalVector;
use lookahead_core::datagen::{CUSTOMER_GOAL_LABELS, SERVER_GOAL_LABELS};

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<ChatError> for ApiError {
    fn from(e: ChatError) -> Self {
        let status = match &e {
            ChatError::NotFound(_) => StatusCode::NOT_FOUND,
            ChatError::Ended(_) => StatusCode::CONFLICT,
            ChatError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ChatError::Model(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))
}

fn goals(bits: Option<Vec<u8>>) -> ApiResult<Option<GoalVector>> {
    bits.map(|b| {
        GoalVector::from_bits(&b).ok_or_else(|| ApiError(StatusCode::BAD_REQUEST, "goal bits must be 0 or 1".into()))
    })
    .transpose()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    /// Agent (server side) goals.
    goals: Option<Vec<u8>>,
    /// Human (customer side) goals.
    human_goals: Option<Vec<u8>>,
}

#[derive(Debug, Deserialize)]
struct MessageBody {
    text: String,
}

#[derive(Debug, Default, Deserialize)]
struct EndBody {
    outcome: Option<Outcome>,
}

#[derive(Debug, Serialize)]
struct Dims {
    embed_dim: usize,
    goal_hidden: usize,
    hidden: usize,
}

#[derive(Debug, Serialize)]
struct ModelInfo {
    k: usize,
    dims: Dims,
    vocab_size: usize,
    version: u32,
    goal_bits: usize,
    use_lookahead: bool,
    bidirectional: bool,
    agent_goal_labels: &'static [&'static str],
    human_goal_labels: &'static [&'static str],
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn create(State(engine): State<Arc<ChatEngine>>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let body: CreateBody = if body.iter().all(u8::is_ascii_whitespace) {
        CreateBody::default()
    } else {
        parse(&body)?
    };
    let session = engine.create(goals(body.goals)?, goals(body.human_goals)?)?;
    Ok((StatusCode::CREATED, Json(session)))
}

async fn message(
    State(engine): State<Arc<ChatEngine>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let body: MessageBody = parse(&body)?;
    let reply = blocking(move || Ok(engine.message(&id, &body.text)?)).await?;
    Ok(Json(reply))
}

async fn session(State(engine): State<Arc<ChatEngine>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(engine.get(&id)?))
}

async fn end(State(engine): State<Arc<ChatEngine>>, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let body: EndBody = if body.is_empty() { EndBody::default() } else { parse(&body)? };
    Ok(Json(engine.end(&id, body.outcome)?))
}

async fn export(State(engine): State<Arc<ChatEngine>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let record = engine.export(&id).map_err(|e| match e {
        ChatError::BadRequest(m) => ApiError(StatusCode::CONFLICT, m),
        e => e.into(),
    })?;
    Ok(Json(record))
}

async fn model_info(State(engine): State<Arc<ChatEngine>>) -> impl IntoResponse {
    let m = engine.model();
    Json(ModelInfo {
        k: m.config.effective_k(),
        dims: Dims {
            embed_dim: m.config.embed_dim,
            goal_hidden: m.config.goal_hidden,
            hidden: m.config.hidden,
        },
        vocab_size: m.vocab.len(),
        version: checkpoint::VERSION,
        goal_bits: m.config.goal_bits,
        use_lookahead: m.config.use_lookahead,
        bidirectional: m.config.bidirectional,
        agent_goal_labels: &SERVER_GOAL_LABELS,
        human_goal_labels: &CUSTOMER_GOAL_LABELS,
    })
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(engine: Arc<ChatEngine>) -> Router {
    Router::new()
        .route("/session", post(create))
        .route("/session/{id}", get(session))
        .route("/session/{id}/message", post(message))
        .route("/session/{id}/end", post(end))
        .route("/session/{id}/export", get(export))
        .route("/model/info", get(model_info))
        .route("/healthz", get(healthz))
        .with_state(engine)
}

pub async fn serve(engine: Arc<ChatEngine>, bind: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            tokio::signal::ctrl_c().await.ok();
        })
        .await?;
    Ok(())
}

use std::sync::Arc;
use std::time::Instant;

use axum::body::{Body, Bytes};
use axum::extract::{Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use edubot_core::{clean_whitespace, Engine};
use serde::{Deserialize, Serialize};

use crate::sessions::SessionManager;

#[derive(Debug, Clone, Deserialize)]
pub struct ChatRequest {
    #[serde(default)]
    pub session_id: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub session_id: String,
    pub response: String,
    pub confidence: f64,
    pub is_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub statement_count: Option<u64>,
    pub uptime_seconds: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OriginPolicy {
    Any,
    List(Vec<String>),
}

impl OriginPolicy {
    pub fn from_list(origins: &[String]) -> Self {
        if origins.iter().any(|o| o.trim() == "*") {
            return Self::Any;
        }
        Self::List(
            origins
                .iter()
                .map(|o| o.trim().trim_end_matches('/').to_owned())
                .collect(),
        )
    }

    fn allows(&self, origin: &str) -> bool {
        match self {
            Self::Any => true,
            Self::List(list) => list.iter().any(|o| o == origin),
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Engine,
    pub sessions: Arc<SessionManager>,
    pub origins: Arc<OriginPolicy>,
    pub max_input_chars: usize,
    pub started: Instant,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    error: &'static str,
    detail: String,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, detail: impl Into<String>) -> Self {
        Self {
            status,
            error,
            detail: detail.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.error, "detail": self.detail });
        (self.status, Json(body)).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    let origins = state.origins.clone();
    Router::new()
        .route("/api/chat", post(chat))
        .route("/api/health", get(health))
        .with_state(state)
        .layer(middleware::from_fn_with_state(origins, cors))
        .layer(middleware::from_fn(log_request))
}

async fn chat(State(state): State<AppState>, body: Bytes) -> Result<Json<ChatResponse>, ApiError> {
    let request: ChatRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_request", e.to_string()))?;
    let text = clean_whitespace(&request.text);
    if text.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty_text", "text is blank"));
    }
    let length = text.chars().count();
    if length > state.max_input_chars {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "text_too_long",
            format!("text has {length} characters, the limit is {}", state.max_input_chars),
        ));
    }

    let (session_id, handle) = state.sessions.resolve(request.session_id.as_deref());
    let mut session = handle.lock_owned().await;
    let mut working = session.clone();
    let engine = state.engine.clone();
    let (working, reply) = tokio::task::spawn_blocking(move || {
        let reply = engine.get_response(&mut working, &text);
        (working, reply)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;

    if let Some(err) = reply.store_error {
        tracing::error!(session = %session_id, error = %err, "store failure");
        return Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store_failure", err.to_string()));
    }
    *session = working;
    Ok(Json(ChatResponse {
        session_id,
        response: reply.result.text,
        confidence: reply.result.confidence,
        is_fallback: reply.result.is_fallback,
    }))
}

async fn health(State(state): State<AppState>) -> Response {
    let store = state.engine.store().clone();
    let counted = tokio::task::spawn_blocking(move || {
        store.check_health()?;
        store.count_statements()
    })
    .await;
    let uptime_seconds = state.started.elapsed().as_secs();
    match counted {
        Ok(Ok(count)) => Json(Health {
            status: "ok".into(),
            statement_count: Some(count),
            uptime_seconds,
        })
        .into_response(),
        other => {
            if let Ok(Err(e)) = other {
                tracing::warn!(error = %e, "store unhealthy");
            }
            let body = Health {
                status: "degraded".into(),
                statement_count: None,
                uptime_seconds,
            };
            (StatusCode::SERVICE_UNAVAILABLE, Json(body)).into_response()
        }
    }
}

/// Refuses disallowed origins, answers preflights, and marks allowed
/// responses so a page on another origin may read them.
async fn cors(State(policy): State<Arc<OriginPolicy>>, request: Request, next: Next) -> Response {
    let Some(origin) = request.headers().get(header::ORIGIN).cloned() else {
        return next.run(request).await;
    };
    let origin_text = origin.to_str().unwrap_or_default();
    if !policy.allows(origin_text) {
        return ApiError::new(
            StatusCode::FORBIDDEN,
            "origin_not_allowed",
            format!("origin {origin_text:?} may not use this API"),
        )
        .into_response();
    }

    let mut response = if request.method() == Method::OPTIONS {
        let mut preflight = Response::new(Body::empty());
        *preflight.status_mut() = StatusCode::NO_CONTENT;
        let headers = preflight.headers_mut();
        headers.insert(
            header::ACCESS_CONTROL_ALLOW_METHODS,
            HeaderValue::from_static("GET, POST, OPTIONS"),
        );
        headers.insert(header::ACCESS_CONTROL_ALLOW_HEADERS, HeaderValue::from_static("content-type"));
        headers.insert(header::ACCESS_CONTROL_MAX_AGE, HeaderValue::from_static("600"));
        preflight
    } else {
        next.run(request).await
    };
    let allow = match *policy {
        OriginPolicy::Any => HeaderValue::from_static("*"),
        OriginPolicy::List(_) => origin,
    };
    let headers = response.headers_mut();
    headers.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, allow);
    headers.append(header::VARY, HeaderValue::from_static("origin"));
    response
}

async fn log_request(request: Request, next: Next) -> Response {
    let started = Instant::now();
    let method = request.method().clone();
    let path = request.uri().path().to_owned();
    let response = next.run(request).await;
    tracing::info!(
        target: "edubot::request",
        %method,
        %path,
        status = response.status().as_u16(),
        elapsed_ms = started.elapsed().as_millis() as u64,
        "request"
    );
    response
}

//! HTTP model backend: `POST {endpoint}/v1/{role}`.
//!
//! The request body is the backend request object plus a `prompt` field
//! holding the rendered system/user text. A response is either the typed
//! role object or `{"text": ...}` with raw model output, which goes through
//! the remote answer grammar.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use embodia_core::backend::{Backend, BackendError, BackendRequest, BackendResponse, Role};
use embodia_core::prompt;
use serde_json::Value;

pub struct RemoteBackend {
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        RemoteBackend {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            agent,
        }
    }
}

/// The JSON body sent for a request.
pub fn request_body(req: &BackendRequest) -> Value {
    let mut body = serde_json::to_value(req).expect("requests serialize");
    let bundle = prompt::remote_render(req);
    body["prompt"] = serde_json::json!({ "system": bundle.system, "user": bundle.user });
    body
}

/// Decode a response body for `role`.
pub fn decode_response(role: Role, body: Value) -> Result<BackendResponse, BackendError> {
    if let Some(text) = body.get("text").and_then(Value::as_str) {
        return prompt::remote_parse(role, text);
    }
    let raw = body.to_string();
    BackendResponse::from_json(role, body).map_err(|_| BackendError::Parse { role, raw })
}

impl Backend for RemoteBackend {
    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let role = req.role();
        let url = format!("{}/v1/{}", self.endpoint, role);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(request_body(req))
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let body: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        decode_response(role, body)
    }
}

/// How a fixture server answers.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ReplyStyle {
    Typed,
    /// `{"text": ...}` in the remote answer grammar.
    Text,
}

struct FixtureState {
    backend: Arc<dyn Backend + Send + Sync>,
    style: ReplyStyle,
}

async fn handle(
    State(st): State<Arc<FixtureState>>,
    Path(role): Path<String>,
    Json(body): Json<Value>,
) -> Result<Json<Value>, (StatusCode, String)> {
    let req: BackendRequest =
        serde_json::from_value(body).map_err(|e| (StatusCode::BAD_REQUEST, e.to_string()))?;
    if req.role().as_str() != role {
        return Err((StatusCode::BAD_REQUEST, format!("path role {role} vs body role {}", req.role())));
    }
    let backend = st.backend.clone();
    let resp = tokio::task::spawn_blocking(move || backend.call(&req))
        .await
        .map_err(|e| (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| (StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    Ok(Json(match st.style {
        ReplyStyle::Typed => resp.to_json(),
        ReplyStyle::Text => serde_json::json!({ "text": prompt::canonical_format(&resp) }),
    }))
}

/// Serve any backend over the HTTP protocol.
pub fn fixture_router(backend: Arc<dyn Backend + Send + Sync>, style: ReplyStyle) -> Router {
    Router::new()
        .route("/v1/{role}", post(handle))
        .with_state(Arc::new(FixtureState { backend, style }))
}

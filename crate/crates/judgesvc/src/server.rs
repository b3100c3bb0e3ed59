//! HTTP routes.
//!
//! | method | path | response |
//! |---|---|---|
//! | GET | `/api/health` | `{"status":"ok"}` |
//! | GET | `/api/session/{id}/next?judge=J` | `{pair_index, left_uri, right_uri, progress}` or `{done: true, progress}` |
//! | POST | `/api/judgment` | `{ok, outcome, log_len}` |
//! | GET | `/api/session/{id}/tally?policy=a&mode=judgment` | `{win, loss, tie, p, n, wins, losses, ties}` |
//! | GET | `/media/...` | files under the media directory |
//!
//! Errors come back as `{"error": "..."}` with status 400 (bad input or
//! verdict), 404 (unknown session or pair), 409 (duplicate, or a pair that
//! is not the one currently served) or 422 (tally with no judgments).

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::error::JudgeError;
use crate::service::{Service, Submission};
use crate::tally::{Side, TallyMode};

impl IntoResponse for JudgeError {
    fn into_response(self) -> Response {
        let status = match &self {
            JudgeError::InvalidVerdict(_) | JudgeError::BadRequest(_) | JudgeError::Spec(_) => StatusCode::BAD_REQUEST,
            JudgeError::UnknownSession(_) | JudgeError::UnknownPair { .. } => StatusCode::NOT_FOUND,
            JudgeError::Duplicate { .. } | JudgeError::NotServed { .. } => StatusCode::CONFLICT,
            JudgeError::NoJudgments => StatusCode::UNPROCESSABLE_ENTITY,
            JudgeError::Log { .. } | JudgeError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type Shared = Arc<Service>;

#[derive(Deserialize)]
struct NextQuery {
    judge: Option<String>,
}

#[derive(Deserialize)]
struct TallyQuery {
    policy: Option<String>,
    mode: Option<String>,
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn next(State(svc): State<Shared>, Path(id): Path<String>, Query(q): Query<NextQuery>) -> Response {
    let judge = q.judge.unwrap_or_default();
    match svc.study(&id).and_then(|s| s.next_pair(&judge)) {
        Ok(n) => Json(n).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn judgment(State(svc): State<Shared>, body: axum::body::Bytes) -> Response {
    let sub: Submission = match serde_json::from_slice(&body) {
        Ok(s) => s,
        Err(e) => return JudgeError::BadRequest(format!("judgment body: {e}")).into_response(),
    };
    match svc.submit(&sub) {
        Ok(ack) => Json(ack).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn tally(State(svc): State<Shared>, Path(id): Path<String>, Query(q): Query<TallyQuery>) -> Response {
    let run = || {
        let side: Side = q.policy.as_deref().map(str::parse).transpose()?.unwrap_or_default();
        let mode: TallyMode = q.mode.as_deref().map(str::parse).transpose()?.unwrap_or_default();
        svc.study(&id)?.tally(side, mode)
    };
    match run() {
        Ok(t) => Json(t).into_response(),
        Err(e) => e.into_response(),
    }
}

pub fn router(service: Arc<Service>) -> Router {
    let mut app = Router::new()
        .route("/api/health", get(health))
        .route("/api/session/{id}/next", get(next))
        .route("/api/session/{id}/tally", get(tally))
        .route("/api/judgment", post(judgment));
    if let Some(dir) = service.media_dir() {
        app = app.nest_service("/media", ServeDir::new(dir));
    }
    app.with_state(service)
}

/// Serve until ctrl-c.
pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

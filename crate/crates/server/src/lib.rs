//! HTTP front end for batch rewards and group advantages.
//!
//! | method | path          | body                 | response            |
//! |--------|---------------|----------------------|---------------------|
//! | POST   | `/score`      | `RewardRequest`      | `RewardResponse`    |
//! | POST   | `/advantages` | `AdvantageRequest`   | `AdvantageResponse` |
//! | GET    | `/health`     |                      | `Health`            |
//!
//! Failures return `{"error": "..."}` with a 4xx status. Handlers share only
//! the immutable [`ServiceConfig`].

use std::future::Future;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ras_core::reward::{AdvantageRequest, Health, RewardConfig, RewardRequest};
use ras_core::{group_advantages, score_batch};
use serde::Serialize;
use tokio::net::TcpListener;

pub const DEFAULT_BODY_LIMIT: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub reward: RewardConfig,
    /// Largest accepted request body in bytes.
    pub body_limit: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            reward: RewardConfig::default(),
            body_limit: DEFAULT_BODY_LIMIT,
        }
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        let status = match r.status() {
            StatusCode::PAYLOAD_TOO_LARGE => StatusCode::PAYLOAD_TOO_LARGE,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(status, r.body_text())
    }
}

fn bad_request(e: impl ToString) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, e.to_string())
}

type Shared = Arc<ServiceConfig>;

pub fn router(config: ServiceConfig) -> Router {
    let limit = config.body_limit;
    Router::new()
        .route("/score", post(score))
        .route("/advantages", post(advantages))
        .route("/health", get(health))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(Arc::new(config))
}

async fn score(
    State(config): State<Shared>,
    body: Result<Json<RewardRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let res = tokio::task::spawn_blocking(move || score_batch(&req, &config.reward))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(res.map_err(bad_request)?).into_response())
}

async fn advantages(body: Result<Json<AdvantageRequest>, JsonRejection>) -> Result<Response, ApiError> {
    let Json(req) = body?;
    Ok(Json(group_advantages(&req).map_err(bad_request)?).into_response())
}

async fn health(State(config): State<Shared>) -> Json<Health> {
    Json(Health::new(config.reward.default_alpha))
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: TcpListener,
    config: ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(config))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Resolves on Ctrl-C.
pub async fn interrupt() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        tracing::error!("cannot listen for interrupt: {e}");
        std::future::pending::<()>().await;
    }
    tracing::info!("shutting down");
}

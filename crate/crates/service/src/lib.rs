//! HTTP front end for crowd annotation: hands out task leases, takes vote
//! submissions and reports labeling progress.
//!
//! Routes:
//! - `GET /api/task?worker=ID` returns a task payload, or 204 when nothing is left for that worker.
//! - `POST /api/votes` takes `{worker, task_id, votes: [{fmss, class_id}]}` and returns `{accepted}`.
//!   A late submission gets 409 with error `lease_expired`, a submission without a lease 409 with
//!   `no_lease`, an unknown task 404, and invalid votes 422.
//! - `GET /api/progress` returns a progress summary.
//! - `/static/...` serves scene and overlay images from the data directory.

mod state;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

pub use state::{
    ClassEntry, Clock, ManualClock, Progress, SegmentRef, Service, ServiceConfig, ServiceError,
    Submission, SystemClock, TaskPayload, VoteInput, CLASSES_FILE, DEFAULT_LEASE_MINUTES,
    DEFAULT_QUOTA, EVENTS_FILE, PALETTE_FILE, STATIC_DIR, TASKS_FILE, VOTES_FILE,
};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::UnknownTask(_) => StatusCode::NOT_FOUND,
            ServiceError::NoLease { .. } | ServiceError::LeaseExpired { .. } => {
                StatusCode::CONFLICT
            }
            ServiceError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Storage(_) | ServiceError::Config(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (
            status,
            Json(json!({ "error": self.key(), "message": self.to_string() })),
        )
            .into_response()
    }
}

#[derive(Deserialize)]
struct WorkerQuery {
    worker: String,
}

async fn task(
    State(svc): State<Arc<Service>>,
    Query(q): Query<WorkerQuery>,
) -> Result<Response, ServiceError> {
    Ok(match svc.next_task(&q.worker)? {
        Some(payload) => Json(payload).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn votes(
    State(svc): State<Arc<Service>>,
    Json(sub): Json<Submission>,
) -> Result<Response, ServiceError> {
    let accepted = svc.submit_votes(&sub)?;
    Ok(Json(json!({ "accepted": accepted })).into_response())
}

async fn progress(State(svc): State<Arc<Service>>) -> Json<Progress> {
    Json(svc.progress())
}

pub fn router(svc: Arc<Service>) -> Router {
    let mut app = Router::new()
        .route("/api/task", get(task))
        .route("/api/votes", post(votes))
        .route("/api/progress", get(progress));
    if let Some(dir) = svc.static_dir() {
        app = app.nest_service("/static", ServeDir::new(dir));
    }
    app.with_state(svc)
}

/// Opens the data directory and serves until the process is stopped.
pub async fn serve(port: u16, data_dir: &Path, config: ServiceConfig) -> Result<(), ServiceError> {
    let svc = Arc::new(Service::open(data_dir, config, Arc::new(SystemClock))?);
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ServiceError::Config(format!("{addr}: {e}")))?;
    axum::serve(listener, router(svc))
        .await
        .map_err(|e| ServiceError::Storage(e.to_string()))
}

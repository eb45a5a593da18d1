#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use roadlabel_core::annotation::{build_tasks, AnnotationTask, Segment};
use roadlabel_core::world::FmssId;
use roadlabel_service::{router, ManualClock, Service, ServiceConfig, TASKS_FILE};
use serde_json::Value;
use tower::ServiceExt;

pub const START_MS: u64 = 1_700_000_000_000;

/// `scenes` scenes with `per_scene` segments each.
pub fn tasks(scenes: u32, per_scene: u32) -> Vec<AnnotationTask> {
    let segs: Vec<Segment> = (0..scenes)
        .flat_map(|s| {
            (0..per_scene).map(move |i| Segment {
                fmss: FmssId::new(format!("scene{s}.ydr"), format!("m{i}"), i % 4, 0),
                scene: s,
                pixel_count: 100,
                bbox: [0, 0, 10, 10],
            })
        })
        .collect();
    build_tasks(&segs)
}

pub fn write_tasks(dir: &Path, tasks: &[AnnotationTask]) {
    std::fs::write(dir.join(TASKS_FILE), serde_json::to_string(tasks).unwrap()).unwrap();
}

pub fn open(dir: &Path, clock: &ManualClock, config: ServiceConfig) -> (Arc<Service>, Router) {
    let svc = Arc::new(Service::open(dir, config, Arc::new(clock.clone())).unwrap());
    let app = router(svc.clone());
    (svc, app)
}

pub async fn call(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::Null)
    };
    (status, value)
}

/// Votes for every segment of a task payload, class chosen by `class`.
pub fn all_votes(payload: &Value, class: impl Fn(usize) -> u32) -> Value {
    let votes: Vec<Value> = payload["segments"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, s)| serde_json::json!({ "fmss": s["fmss"], "class_id": class(i) }))
        .collect();
    Value::Array(votes)
}

mod common;

use axum::http::StatusCode;
use common::*;
use roadlabel_service::{ManualClock, ServiceConfig};
use serde_json::json;

fn setup(scenes: u32, per_scene: u32) -> (tempfile::TempDir, ManualClock) {
    let dir = tempfile::tempdir().unwrap();
    write_tasks(dir.path(), &tasks(scenes, per_scene));
    (dir, ManualClock::new(START_MS))
}

#[tokio::test]
async fn fresh_worker_gets_task_zero_and_keeps_its_lease() {
    let (dir, clock) = setup(2, 5);
    let (_, app) = open(dir.path(), &clock, ServiceConfig::default());
    let (status, p) = call(&app, "GET", "/api/task?worker=w", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(p["task_id"], 0);
    assert_eq!(p["segments"].as_array().unwrap().len(), 10);
    assert_eq!(p["classes"].as_array().unwrap().len(), 37);
    assert_eq!(p["classes"][21]["name"], "Road");
    assert_eq!(p["deadline_ms"], START_MS + 20 * 60_000);
    assert_eq!(p["segments"][0]["scene_image"], "/static/scenes/0.png");

    clock.advance_ms(1000);
    let (_, again) = call(&app, "GET", "/api/task?worker=w", None).await;
    assert_eq!(again, p);
}

#[tokio::test]
async fn on_time_submission_then_nothing_left() {
    let (dir, clock) = setup(2, 5);
    let (svc, app) = open(dir.path(), &clock, ServiceConfig::default());
    let (_, p) = call(&app, "GET", "/api/task?worker=w", None).await;
    clock.advance_ms(5 * 60_000);
    let body = json!({ "worker": "w", "task_id": 0, "votes": all_votes(&p, |i| (i % 37) as u32) });
    let (status, r) = call(&app, "POST", "/api/votes", Some(body.clone())).await;
    assert_eq!((status, r), (StatusCode::OK, json!({ "accepted": 10 })));
    assert_eq!(svc.ballots().len(), 10);

    let (status, _) = call(&app, "GET", "/api/task?worker=w", None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    // the lease is gone, so a replay of the same body is refused
    let (status, r) = call(&app, "POST", "/api/votes", Some(body)).await;
    assert_eq!(
        (status, r["error"].as_str()),
        (StatusCode::CONFLICT, Some("no_lease"))
    );
}

#[tokio::test]
async fn late_submission_is_rejected_and_not_recorded() {
    let (dir, clock) = setup(1, 4);
    let (svc, app) = open(dir.path(), &clock, ServiceConfig::default());
    let (_, p) = call(&app, "GET", "/api/task?worker=w", None).await;
    clock.advance_ms(21 * 60_000);
    let body = json!({ "worker": "w", "task_id": 0, "votes": all_votes(&p, |_| 3) });
    let (status, r) = call(&app, "POST", "/api/votes", Some(body)).await;
    assert_eq!(
        (status, r["error"].as_str()),
        (StatusCode::CONFLICT, Some("lease_expired"))
    );
    assert!(svc.ballots().is_empty());
    // the same task is never handed to this worker again
    let (status, _) = call(&app, "GET", "/api/task?worker=w", None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
}

#[tokio::test]
async fn invalid_vote_rejects_whole_submission() {
    let (dir, clock) = setup(1, 4);
    let (svc, app) = open(dir.path(), &clock, ServiceConfig::default());
    let (_, p) = call(&app, "GET", "/api/task?worker=w", None).await;
    let body = json!({ "worker": "w", "task_id": 0, "votes": all_votes(&p, |i| if i == 3 { 999 } else { 1 }) });
    let (status, r) = call(&app, "POST", "/api/votes", Some(body)).await;
    assert_eq!(
        (status, r["error"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("invalid_submission"))
    );
    assert!(svc.ballots().is_empty());

    let foreign = json!({ "worker": "w", "task_id": 0, "votes": [{ "fmss": { "file": "x", "model": "y", "shader": 0, "sampler": 0 }, "class_id": 1 }] });
    assert_eq!(
        call(&app, "POST", "/api/votes", Some(foreign)).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );

    // the lease survives a rejected submission
    let body = json!({ "worker": "w", "task_id": 0, "votes": all_votes(&p, |_| 1) });
    assert_eq!(
        call(&app, "POST", "/api/votes", Some(body)).await.1,
        json!({ "accepted": 4 })
    );
}

#[tokio::test]
async fn unknown_task_and_missing_lease() {
    let (dir, clock) = setup(1, 4);
    let (_, app) = open(dir.path(), &clock, ServiceConfig::default());
    let body = json!({ "worker": "w", "task_id": 9, "votes": [] });
    assert_eq!(
        call(&app, "POST", "/api/votes", Some(body)).await.0,
        StatusCode::NOT_FOUND
    );
    let body = json!({ "worker": "w", "task_id": 0, "votes": [] });
    let (status, r) = call(&app, "POST", "/api/votes", Some(body)).await;
    assert_eq!(
        (status, r["error"].as_str()),
        (StatusCode::CONFLICT, Some("no_lease"))
    );
    assert_eq!(
        call(&app, "GET", "/api/task", None).await.0,
        StatusCode::BAD_REQUEST
    );
}

#[tokio::test]
async fn quota_caps_concurrent_leases() {
    let (dir, clock) = setup(1, 4);
    let (_, app) = open(
        dir.path(),
        &clock,
        ServiceConfig {
            quota: 3,
            ..Default::default()
        },
    );
    for w in ["a", "b", "c"] {
        assert_eq!(
            call(&app, "GET", &format!("/api/task?worker={w}"), None)
                .await
                .1["task_id"],
            0
        );
    }
    assert_eq!(
        call(&app, "GET", "/api/task?worker=d", None).await.0,
        StatusCode::NO_CONTENT
    );
    // an expired lease frees its slot
    clock.advance_ms(20 * 60_000 + 1);
    assert_eq!(
        call(&app, "GET", "/api/task?worker=d", None).await.1["task_id"],
        0
    );
}

#[tokio::test]
async fn progress_counts_and_replay() {
    let (dir, clock) = setup(2, 5);
    let (_, app) = open(dir.path(), &clock, ServiceConfig::default());
    let (_, fresh) = call(&app, "GET", "/api/progress", None).await;
    assert_eq!(fresh["tasks_outstanding"], 1);
    assert_eq!(fresh["ballots_by_votes"], json!({}));
    assert_eq!(fresh["remaining_votes"], 70);

    for w in 0..7 {
        let worker = format!("w{w}");
        let (_, p) = call(&app, "GET", &format!("/api/task?worker={worker}"), None).await;
        clock.advance_ms(1);
        let body = json!({ "worker": worker, "task_id": 0, "votes": all_votes(&p, |i| ((i + w) % 5) as u32) });
        assert_eq!(
            call(&app, "POST", "/api/votes", Some(body)).await.1["accepted"],
            10
        );
    }
    let (_, done) = call(&app, "GET", "/api/progress", None).await;
    assert_eq!(done["tasks_outstanding"], 0);
    assert_eq!(done["ballots_by_votes"], json!({ "7": 10 }));
    assert_eq!(done["remaining_votes"], 0);
    drop(app);

    let (_, reopened) = open(dir.path(), &clock, ServiceConfig::default());
    assert_eq!(call(&reopened, "GET", "/api/progress", None).await.1, done);
}

#[tokio::test]
async fn static_files_are_served() {
    let (dir, clock) = setup(1, 1);
    std::fs::create_dir_all(dir.path().join("static/scenes")).unwrap();
    std::fs::write(dir.path().join("static/scenes/0.png"), b"\x89PNG fake").unwrap();
    let (_, app) = open(dir.path(), &clock, ServiceConfig::default());
    assert_eq!(
        call(&app, "GET", "/static/scenes/0.png", None).await.0,
        StatusCode::OK
    );
    assert_eq!(
        call(&app, "GET", "/static/scenes/1.png", None).await.0,
        StatusCode::NOT_FOUND
    );
}

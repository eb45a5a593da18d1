mod common;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

use axum::http::StatusCode;
use common::*;
use roadlabel_core::annotation::{AnnotationTask, Segment};
use roadlabel_core::world::FmssId;
use roadlabel_service::{ManualClock, ServiceConfig};
use serde_json::json;

/// Single-scene tasks whose sections overlap with neighboring tasks.
fn overlapping_tasks(n: u32) -> Vec<AnnotationTask> {
    (0..n)
        .map(|t| AnnotationTask {
            id: t,
            scenes: vec![t],
            segments: (0..3)
                .map(|k| Segment {
                    fmss: FmssId::new("shared.ydr", format!("m{}", (t + k) % 50), 0, 0),
                    scene: t,
                    pixel_count: 10,
                    bbox: [0, 0, 2, 2],
                })
                .collect(),
            time_limit_min: 20,
        })
        .collect()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 8)]
async fn concurrent_clients_keep_invariants() {
    let dir = tempfile::tempdir().unwrap();
    write_tasks(dir.path(), &overlapping_tasks(40));
    let clock = ManualClock::new(START_MS);
    let config = ServiceConfig {
        quota: 5,
        ..Default::default()
    };
    let (svc, app) = open(dir.path(), &clock, config);

    let accepted_submissions = Arc::new(AtomicUsize::new(0));
    let stop = Arc::new(AtomicBool::new(false));
    let monitor = {
        let (svc, stop) = (svc.clone(), stop.clone());
        tokio::spawn(async move {
            while !stop.load(Ordering::SeqCst) {
                for (done, live) in svc.task_occupancy() {
                    assert!(
                        done + live <= 5,
                        "quota exceeded: {done} done + {live} leased"
                    );
                }
                let p = svc.progress();
                let total: usize = p.ballots_by_votes.iter().map(|(k, n)| k * n).sum();
                assert_eq!(total, p.votes_recorded);
                tokio::task::yield_now().await;
            }
        })
    };

    let mut clients = Vec::new();
    for c in 0..8 {
        let (app, count) = (app.clone(), accepted_submissions.clone());
        clients.push(tokio::spawn(async move {
            for w in 0..6 {
                let worker = format!("c{c}w{w}");
                loop {
                    let (status, p) = call(&app, "GET", &format!("/api/task?worker={worker}"), None).await;
                    if status == StatusCode::NO_CONTENT {
                        break;
                    }
                    let task = p["task_id"].as_u64().unwrap();
                    let body = json!({ "worker": worker, "task_id": task, "votes": all_votes(&p, |i| (i + c) as u32 % 37) });
                    let (status, _) = call(&app, "POST", "/api/votes", Some(body.clone())).await;
                    assert_eq!(status, StatusCode::OK);
                    count.fetch_add(1, Ordering::SeqCst);
                    // duplicate delivery of the same body must be refused
                    assert_eq!(call(&app, "POST", "/api/votes", Some(body)).await.0, StatusCode::CONFLICT);
                }
            }
        }));
    }
    for c in clients {
        c.await.unwrap();
    }
    stop.store(true, Ordering::SeqCst);
    monitor.await.unwrap();

    // 48 workers, 40 tasks, quota 5: every task fills up
    assert_eq!(accepted_submissions.load(Ordering::SeqCst), 200);
    for b in svc.ballots() {
        let workers: BTreeSet<&str> = b.votes.iter().map(|v| v.worker.as_str()).collect();
        assert_eq!(workers.len(), b.votes.len(), "repeat voter on {}", b.fmss);
    }
    let before = svc.progress();
    assert_eq!(before.tasks_outstanding, 0);
    drop((svc, app));
    let (reopened, _) = open(dir.path(), &clock, config);
    assert_eq!(reopened.progress(), before);
    assert_eq!(reopened.ballots().len(), 42);
}

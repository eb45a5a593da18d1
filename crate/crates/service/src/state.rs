use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use roadlabel_core::annotation::{AnnotationTask, Vote, VoteStore};
use roadlabel_core::compositor::Palette;
use roadlabel_core::taxonomy::{load_taxonomy, road_scene_palette, ClassTaxonomy};
use roadlabel_core::world::FmssId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_QUOTA: usize = 7;
pub const DEFAULT_LEASE_MINUTES: u32 = 20;

pub const TASKS_FILE: &str = "tasks.json";
pub const CLASSES_FILE: &str = "classes.csv";
pub const PALETTE_FILE: &str = "palette.csv";
pub const VOTES_FILE: &str = "votes.ndjson";
pub const EVENTS_FILE: &str = "events.ndjson";
pub const STATIC_DIR: &str = "static";

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    }
}

/// Clock that only moves when told to.
#[derive(Clone, Default)]
pub struct ManualClock(Arc<AtomicU64>);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        ManualClock(Arc::new(AtomicU64::new(start_ms)))
    }

    pub fn advance_ms(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }

    pub fn set_ms(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("unknown task {0}")]
    UnknownTask(u32),
    #[error("worker {worker} holds no lease on task {task}")]
    NoLease { worker: String, task: u32 },
    #[error("lease of worker {worker} on task {task} expired at {deadline_ms}")]
    LeaseExpired {
        worker: String,
        task: u32,
        deadline_ms: u64,
    },
    #[error("invalid submission: {0}")]
    Invalid(String),
    #[error("storage error: {0}")]
    Storage(String),
    #[error("bad configuration: {0}")]
    Config(String),
}

impl ServiceError {
    /// Stable machine-readable key.
    pub fn key(&self) -> &'static str {
        match self {
            ServiceError::UnknownTask(_) => "unknown_task",
            ServiceError::NoLease { .. } => "no_lease",
            ServiceError::LeaseExpired { .. } => "lease_expired",
            ServiceError::Invalid(_) => "invalid_submission",
            ServiceError::Storage(_) => "storage",
            ServiceError::Config(_) => "config",
        }
    }
}

fn storage(e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Storage(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceConfig {
    /// Distinct workers that may complete each task.
    pub quota: usize,
    pub lease_minutes: u32,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            quota: DEFAULT_QUOTA,
            lease_minutes: DEFAULT_LEASE_MINUTES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: u8,
    pub name: String,
    pub rgb: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRef {
    pub fmss: FmssId,
    pub scene: u32,
    pub scene_image: String,
    pub overlay: String,
    pub bbox: [u32; 4],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPayload {
    pub task_id: u32,
    pub deadline_ms: u64,
    pub time_limit_min: u32,
    pub segments: Vec<SegmentRef>,
    pub classes: Vec<ClassEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteInput {
    pub fmss: FmssId,
    pub class_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub worker: String,
    pub task_id: u32,
    pub votes: Vec<VoteInput>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub tasks_total: usize,
    /// Tasks with fewer completions than the quota.
    pub tasks_outstanding: usize,
    pub active_leases: usize,
    /// Votes per ballot to number of ballots, over ballots with at least one vote.
    pub ballots_by_votes: BTreeMap<usize, usize>,
    pub votes_recorded: usize,
    pub target_votes: usize,
    /// Votes still needed to bring every task section to the target.
    pub remaining_votes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Event {
    Lease {
        worker: String,
        task_id: u32,
        at_ms: u64,
        deadline_ms: u64,
    },
    Complete {
        worker: String,
        task_id: u32,
        at_ms: u64,
        accepted: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Lease {
    task: u32,
    deadline_ms: u64,
}

struct State {
    store: VoteStore,
    completions: Vec<BTreeSet<String>>,
    /// Every task each worker has ever been handed.
    served: HashMap<String, BTreeSet<u32>>,
    leases: HashMap<String, Lease>,
    events: Option<File>,
}

impl State {
    fn lease_live(&self, lease: &Lease, now: u64) -> bool {
        now <= lease.deadline_ms
    }

    fn active_on(&self, task: u32, now: u64) -> usize {
        self.leases
            .values()
            .filter(|l| l.task == task && self.lease_live(l, now))
            .count()
    }

    fn apply(&mut self, e: &Event) {
        match e {
            Event::Lease {
                worker,
                task_id,
                deadline_ms,
                ..
            } => {
                self.served
                    .entry(worker.clone())
                    .or_default()
                    .insert(*task_id);
                self.leases.insert(
                    worker.clone(),
                    Lease {
                        task: *task_id,
                        deadline_ms: *deadline_ms,
                    },
                );
            }
            Event::Complete {
                worker, task_id, ..
            } => {
                if let Some(set) = self.completions.get_mut(*task_id as usize) {
                    set.insert(worker.clone());
                }
                if self.leases.get(worker).is_some_and(|l| l.task == *task_id) {
                    self.leases.remove(worker);
                }
            }
        }
    }

    fn journal(&mut self, e: Event) -> Result<(), ServiceError> {
        if let Some(f) = &mut self.events {
            let mut line = serde_json::to_vec(&e).map_err(storage)?;
            line.push(b'\n');
            f.write_all(&line).map_err(storage)?;
            f.flush().map_err(storage)?;
        }
        self.apply(&e);
        Ok(())
    }
}

/// Task dispatch and vote intake. All mutation goes through one lock, so
/// leasing is a compare-and-set and log appends are totally ordered.
pub struct Service {
    tasks: Vec<AnnotationTask>,
    classes: Vec<ClassEntry>,
    task_fmss: Vec<BTreeSet<FmssId>>,
    all_fmss: BTreeSet<FmssId>,
    config: ServiceConfig,
    clock: Arc<dyn Clock>,
    static_dir: Option<PathBuf>,
    state: Mutex<State>,
}

fn class_entries(t: &ClassTaxonomy, p: &Palette) -> Result<Vec<ClassEntry>, ServiceError> {
    t.iter()
        .map(|(id, name)| {
            let rgb = p.color(id).ok_or_else(|| {
                ServiceError::Config(format!("palette has no color for class {id}"))
            })?;
            Ok(ClassEntry {
                id,
                name: name.to_string(),
                rgb,
            })
        })
        .collect()
}

fn read_to_string(path: &Path) -> Result<String, ServiceError> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
    Ok(s)
}

impl Service {
    /// In-memory service; nothing is persisted.
    pub fn new(
        tasks: Vec<AnnotationTask>,
        taxonomy: &ClassTaxonomy,
        palette: &Palette,
        config: ServiceConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, ServiceError> {
        Self::build(tasks, taxonomy, palette, config, clock, None, None)
    }

    /// Loads `tasks.json` (plus optional `classes.csv` and `palette.csv`,
    /// defaulting to the road-scene set) from `dir` and replays the vote log
    /// and event journal found there.
    pub fn open(
        dir: &Path,
        config: ServiceConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, ServiceError> {
        let tasks: Vec<AnnotationTask> =
            serde_json::from_str(&read_to_string(&dir.join(TASKS_FILE))?)
                .map_err(|e| ServiceError::Config(format!("{TASKS_FILE}: {e}")))?;
        let taxonomy = match dir.join(CLASSES_FILE) {
            p if p.exists() => load_taxonomy(read_to_string(&p)?.as_bytes())
                .map_err(|e| ServiceError::Config(format!("{CLASSES_FILE}: {e}")))?,
            _ => ClassTaxonomy::road_scene(),
        };
        let palette = match dir.join(PALETTE_FILE) {
            p if p.exists() => Palette::from_csv(read_to_string(&p)?.as_bytes())
                .map_err(|e| ServiceError::Config(format!("{PALETTE_FILE}: {e}")))?,
            _ => road_scene_palette(),
        };
        Self::build(
            tasks,
            &taxonomy,
            &palette,
            config,
            clock,
            Some(dir),
            Some(dir.join(STATIC_DIR)),
        )
    }

    fn build(
        tasks: Vec<AnnotationTask>,
        taxonomy: &ClassTaxonomy,
        palette: &Palette,
        config: ServiceConfig,
        clock: Arc<dyn Clock>,
        dir: Option<&Path>,
        static_dir: Option<PathBuf>,
    ) -> Result<Self, ServiceError> {
        if config.quota == 0 {
            return Err(ServiceError::Config("quota must be at least 1".into()));
        }
        for (i, t) in tasks.iter().enumerate() {
            if t.id as usize != i {
                return Err(ServiceError::Config(format!(
                    "task at position {i} has id {}",
                    t.id
                )));
            }
        }
        let classes = class_entries(taxonomy, palette)?;
        let task_fmss: Vec<BTreeSet<FmssId>> = tasks
            .iter()
            .map(|t| t.segments.iter().map(|s| s.fmss.clone()).collect())
            .collect();
        let all_fmss = task_fmss.iter().flatten().cloned().collect();

        let mut state = State {
            store: VoteStore::in_memory(taxonomy.len()),
            completions: vec![BTreeSet::new(); tasks.len()],
            served: HashMap::new(),
            leases: HashMap::new(),
            events: None,
        };
        if let Some(dir) = dir {
            state.store =
                VoteStore::open(&dir.join(VOTES_FILE), taxonomy.len()).map_err(storage)?;
            let path = dir.join(EVENTS_FILE);
            if path.exists() {
                let text = read_to_string(&path)?;
                for (i, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<Event>(line) {
                        Ok(e) => state.apply(&e),
                        // torn final line from an interrupted append
                        Err(_) if i + 1 == text.lines().count() && !text.ends_with('\n') => break,
                        Err(e) => {
                            return Err(storage(format!("{EVENTS_FILE} line {}: {e}", i + 1)))
                        }
                    }
                }
            }
            state.events = Some(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&path)
                    .map_err(storage)?,
            );
        }

        Ok(Service {
            tasks,
            classes,
            task_fmss,
            all_fmss,
            config,
            clock,
            static_dir,
            state: Mutex::new(state),
        })
    }

    pub fn config(&self) -> ServiceConfig {
        self.config
    }

    pub fn static_dir(&self) -> Option<&Path> {
        self.static_dir.as_deref()
    }

    pub fn tasks(&self) -> &[AnnotationTask] {
        &self.tasks
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        // a panic mid-update cannot leave partial state: every mutation is
        // validated before the first write
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn payload(&self, task: u32, deadline_ms: u64) -> TaskPayload {
        let t = &self.tasks[task as usize];
        TaskPayload {
            task_id: t.id,
            deadline_ms,
            time_limit_min: self.config.lease_minutes,
            segments: t
                .segments
                .iter()
                .map(|s| SegmentRef {
                    fmss: s.fmss.clone(),
                    scene: s.scene,
                    scene_image: format!("/static/scenes/{}.png", s.scene),
                    overlay: format!(
                        "/static/overlays/{}/{}/{}/{}_{}.png",
                        s.scene, s.fmss.file, s.fmss.model, s.fmss.shader, s.fmss.sampler
                    ),
                    bbox: s.bbox,
                })
                .collect(),
            classes: self.classes.clone(),
        }
    }

    /// Lowest-id task this worker has never been handed and whose completed
    /// plus in-flight workers are below the quota. A worker with a live lease
    /// gets that lease back.
    pub fn next_task(&self, worker: &str) -> Result<Option<TaskPayload>, ServiceError> {
        if worker.is_empty() {
            return Err(ServiceError::Invalid("worker id is empty".into()));
        }
        let now = self.clock.now_ms();
        let mut st = self.lock();
        if let Some(lease) = st.leases.get(worker).copied() {
            if st.lease_live(&lease, now) {
                return Ok(Some(self.payload(lease.task, lease.deadline_ms)));
            }
            st.leases.remove(worker);
        }
        let served = st.served.get(worker);
        let pick = (0..self.tasks.len() as u32).find(|&t| {
            !served.is_some_and(|s| s.contains(&t))
                && st.completions[t as usize].len() + st.active_on(t, now) < self.config.quota
        });
        let Some(task) = pick else { return Ok(None) };
        let deadline_ms = now + self.config.lease_minutes as u64 * 60_000;
        st.journal(Event::Lease {
            worker: worker.to_string(),
            task_id: task,
            at_ms: now,
            deadline_ms,
        })?;
        Ok(Some(self.payload(task, deadline_ms)))
    }

    /// Records a worker's votes for its leased task. Either every vote is
    /// valid and the submission is processed, or nothing is recorded. Votes
    /// for sections this worker already voted on are skipped and not counted.
    pub fn submit_votes(&self, sub: &Submission) -> Result<usize, ServiceError> {
        let task = sub.task_id;
        if task as usize >= self.tasks.len() {
            return Err(ServiceError::UnknownTask(task));
        }
        let now = self.clock.now_ms();
        let mut st = self.lock();
        let lease = match st.leases.get(&sub.worker) {
            Some(l) if l.task == task => *l,
            _ => {
                return Err(ServiceError::NoLease {
                    worker: sub.worker.clone(),
                    task,
                })
            }
        };
        if !st.lease_live(&lease, now) {
            st.leases.remove(&sub.worker);
            return Err(ServiceError::LeaseExpired {
                worker: sub.worker.clone(),
                task,
                deadline_ms: lease.deadline_ms,
            });
        }

        let mut seen = BTreeSet::new();
        for v in &sub.votes {
            if v.class_id as usize >= self.classes.len() {
                return Err(ServiceError::Invalid(format!(
                    "class id {} for {} is not valid",
                    v.class_id, v.fmss
                )));
            }
            if !self.task_fmss[task as usize].contains(&v.fmss) {
                return Err(ServiceError::Invalid(format!(
                    "{} is not part of task {task}",
                    v.fmss
                )));
            }
            if !seen.insert(&v.fmss) {
                return Err(ServiceError::Invalid(format!("{} appears twice", v.fmss)));
            }
        }

        let mut accepted = 0;
        for v in &sub.votes {
            if st.store.has_vote_from(&sub.worker, &v.fmss) {
                continue;
            }
            let vote = Vote {
                fmss: v.fmss.clone(),
                class_id: v.class_id as u8,
                worker: sub.worker.clone(),
                ts_ms: now,
            };
            st.store.record(vote).map_err(storage)?;
            accepted += 1;
        }
        st.journal(Event::Complete {
            worker: sub.worker.clone(),
            task_id: task,
            at_ms: now,
            accepted,
        })?;
        Ok(accepted)
    }

    pub fn progress(&self) -> Progress {
        let now = self.clock.now_ms();
        let st = self.lock();
        let mut ballots_by_votes = BTreeMap::new();
        for b in st.store.ballots() {
            if !b.votes.is_empty() {
                *ballots_by_votes.entry(b.votes.len()).or_insert(0) += 1;
            }
        }
        let target = self.config.quota;
        let remaining_votes = self
            .all_fmss
            .iter()
            .map(|f| target.saturating_sub(st.store.ballot(f).map_or(0, |b| b.votes.len())))
            .sum();
        Progress {
            tasks_total: self.tasks.len(),
            tasks_outstanding: st.completions.iter().filter(|c| c.len() < target).count(),
            active_leases: st.leases.values().filter(|l| st.lease_live(l, now)).count(),
            ballots_by_votes,
            votes_recorded: st.store.vote_count(),
            target_votes: target,
            remaining_votes,
        }
    }

    /// Snapshot of all ballots, for analysis.
    pub fn ballots(&self) -> Vec<roadlabel_core::annotation::Ballot> {
        self.lock().store.ballots()
    }

    /// Completed workers and live leases per task.
    pub fn task_occupancy(&self) -> Vec<(usize, usize)> {
        let now = self.clock.now_ms();
        let st = self.lock();
        (0..self.tasks.len() as u32)
            .map(|t| (st.completions[t as usize].len(), st.active_on(t, now)))
            .collect()
    }
}

//! Annotation tasks, vote storage, aggregation and vote-count analysis.

mod aggregate;
mod curve;
mod simulate;
mod stats;
mod store;
mod tasks;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::FmssId;

pub use aggregate::{aggregate_labels, plurality};
pub use curve::{
    accuracy_vs_votes, diminishing_returns_point, isotonic_fit, Curve, CurvePoint,
    DEFAULT_TARGET_ACCURACY,
};
pub use simulate::{simulate_votes, AnnotatorModel};
pub use stats::{vote_stats, VoteStats, DEFAULT_SCENE_THRESHOLD};
pub use store::{parse_votes, record_vote, Ack, VoteStore};
pub use tasks::{build_tasks, MAX_SCENES_PER_TASK, MAX_SEGMENTS_PER_TASK, TASK_TIME_LIMIT_MIN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotationError {
    #[error("class id {class} is not valid for a {classes}-class taxonomy")]
    InvalidClass { class: u32, classes: usize },
    #[error("no ballot has a gold label and at least {k_max} votes")]
    NoEligibleBallots { k_max: usize },
    #[error("invalid annotator model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(String),
}

/// One labelable region of a rendered scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub fmss: FmssId,
    pub scene: u32,
    pub pixel_count: u32,
    /// `[x0, y0, x1, y1]`, exclusive upper corner.
    pub bbox: [u32; 4],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub id: u32,
    pub scenes: Vec<u32>,
    pub segments: Vec<Segment>,
    pub time_limit_min: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vote {
    pub fmss: FmssId,
    pub class_id: u8,
    pub worker: String,
    pub ts_ms: u64,
}

/// Every vote cast for one asset section, ordered by timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub fmss: FmssId,
    pub votes: Vec<Vote>,
    #[serde(default)]
    pub gold: Option<u8>,
    #[serde(default)]
    pub scene_count: u32,
}

impl Ballot {
    pub fn new(fmss: FmssId) -> Self {
        Ballot {
            fmss,
            votes: Vec::new(),
            gold: None,
            scene_count: 0,
        }
    }

    /// Inserts after any vote with an equal or earlier timestamp.
    pub(crate) fn insert_vote(&mut self, vote: Vote) {
        let at = self.votes.partition_point(|v| v.ts_ms <= vote.ts_ms);
        self.votes.insert(at, vote);
    }
}

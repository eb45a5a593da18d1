use std::collections::BTreeMap;

use super::{AnnotationTask, Segment};

pub const MAX_SCENES_PER_TASK: usize = 6;
pub const MAX_SEGMENTS_PER_TASK: usize = 270;
pub const TASK_TIME_LIMIT_MIN: u32 = 20;

#[derive(Default)]
struct Open {
    scenes: Vec<u32>,
    segments: Vec<Segment>,
}

impl Open {
    fn fits(&self, n: usize) -> bool {
        self.scenes.len() < MAX_SCENES_PER_TASK && self.segments.len() + n <= MAX_SEGMENTS_PER_TASK
    }

    fn push(&mut self, scene: u32, segs: &[Segment]) {
        self.scenes.push(scene);
        self.segments.extend_from_slice(segs);
    }

    fn flush(&mut self, out: &mut Vec<AnnotationTask>) {
        if self.segments.is_empty() {
            return;
        }
        let open = std::mem::take(self);
        out.push(AnnotationTask {
            id: out.len() as u32,
            scenes: open.scenes,
            segments: open.segments,
            time_limit_min: TASK_TIME_LIMIT_MIN,
        });
    }
}

/// Packs segments into tasks scene by scene (ascending scene id, input order
/// within a scene). A scene that does not fit the open task starts a new one;
/// a scene larger than one task is split into full tasks plus a remainder.
pub fn build_tasks(segments: &[Segment]) -> Vec<AnnotationTask> {
    let mut by_scene: BTreeMap<u32, Vec<Segment>> = BTreeMap::new();
    for s in segments {
        by_scene.entry(s.scene).or_default().push(s.clone());
    }
    let mut out = Vec::new();
    let mut open = Open::default();
    for (scene, segs) in by_scene {
        if segs.len() <= MAX_SEGMENTS_PER_TASK {
            if !open.fits(segs.len()) {
                open.flush(&mut out);
            }
            open.push(scene, &segs);
            continue;
        }
        open.flush(&mut out);
        for chunk in segs.chunks(MAX_SEGMENTS_PER_TASK) {
            open.flush(&mut out);
            open.push(scene, chunk);
        }
    }
    open.flush(&mut out);
    out
}

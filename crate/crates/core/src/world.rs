//! Procedural stand-in worlds and the coverage oracle used to judge plans.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::roadgraph::{partition_vertices, RoadGraph};
use crate::viewplan::{compatible, eligible_vertices, PathCache, PlanConfig, ViewPlan, ViewPose};

/// Identity of one texture-bearing asset section: drawable file, model name,
/// shader index and sampler index. Ordered lexicographically field by field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FmssId {
    pub file: String,
    pub model: String,
    pub shader: u32,
    pub sampler: u32,
}

impl FmssId {
    pub fn new(
        file: impl Into<String>,
        model: impl Into<String>,
        shader: u32,
        sampler: u32,
    ) -> Self {
        FmssId {
            file: file.into(),
            model: model.into(),
            shader,
            sampler,
        }
    }
}

impl fmt::Display for FmssId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}#{}.{}",
            self.file, self.model, self.shader, self.sampler
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Asset {
    #[serde(flatten)]
    pub fmss: FmssId,
    pub x: f64,
    pub y: f64,
}

impl Asset {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub assets: Vec<Asset>,
    #[serde(skip)]
    pub graph_ref: Option<String>,
}

impl SyntheticWorld {
    pub fn distinct_ids(&self) -> BTreeSet<&FmssId> {
        self.assets.iter().map(|a| &a.fmss).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let w: SyntheticWorld =
            serde_json::from_str(text).map_err(|e| WorldError::Json(e.to_string()))?;
        if let Some(a) = w.assets.iter().find(|a| !a.pos().is_finite()) {
            return Err(WorldError::Invalid(format!(
                "asset {} has a non-finite position",
                a.fmss
            )));
        }
        Ok(w)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("exhaustive search limited to {limit} eligible vertices, graph has {found}")]
    GuardExceeded { limit: usize, found: usize },
    #[error("malformed world JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityParams {
    /// Range cutoff in meters, inclusive.
    pub d_max: f64,
    /// Full horizontal field of view in degrees, inclusive at the cone edge.
    pub fov: f64,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        VisibilityParams {
            d_max: 100.0,
            fov: 90.0,
        }
    }
}

impl VisibilityParams {
    pub fn new(d_max: f64, fov: f64) -> Result<Self, WorldError> {
        if !(d_max > 0.0 && d_max.is_finite()) {
            return Err(WorldError::Invalid(format!(
                "d_max must be positive, got {d_max}"
            )));
        }
        if !(fov > 0.0 && fov <= 360.0) {
            return Err(WorldError::Invalid(format!(
                "fov must lie in (0, 360], got {fov}"
            )));
        }
        Ok(VisibilityParams { d_max, fov })
    }

    /// Whether a point at `offset` from the camera falls inside the view cone.
    pub fn sees(&self, look_dir: Vec2, offset: Vec2) -> bool {
        let dist = offset.norm();
        if dist > self.d_max * (1.0 + 1e-12) {
            return false;
        }
        if dist == 0.0 {
            return true;
        }
        let half = (self.fov * 0.5).to_radians();
        look_dir.dot(offset) / dist >= half.cos() - 1e-12
    }
}

/// Lateral half-width of the strip around each road where assets are placed.
pub const ASSET_CORRIDOR: f64 = 15.0;

/// Scatters `density` assets per 100 m of road, uniformly by length, within
/// [`ASSET_CORRIDOR`] of the centerline. The total count is
/// `round(total_length * density / 100)`; roughly three quarters of the
/// assets carry distinct ids and the rest reuse one of them.
pub fn generate_world(
    g: &RoadGraph,
    density: f64,
    rng_seed: u64,
) -> Result<SyntheticWorld, WorldError> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(WorldError::Invalid(format!(
            "density must be positive, got {density}"
        )));
    }
    let segments: Vec<(Vec2, Vec2)> = g
        .edges()
        .iter()
        .map(|e| {
            (
                g.pos(e.a).expect("valid edge"),
                g.pos(e.b).expect("valid edge"),
            )
        })
        .collect();
    let mut cumulative = Vec::with_capacity(segments.len());
    let mut total = 0.0;
    for &(a, b) in &segments {
        total += a.distance(b);
        cumulative.push(total);
    }
    let count = if total > 0.0 {
        (total * density / 100.0).round() as usize
    } else {
        0
    };
    let distinct = count.div_ceil(4) * 3;
    let distinct = distinct.clamp(count.min(1), count.max(1));

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut assets = Vec::with_capacity(count);
    for i in 0..count {
        let k = if i < distinct {
            i
        } else {
            rng.random_range(0..distinct)
        };
        let t = rng.random_range(0.0..total);
        let seg = cumulative
            .partition_point(|&c| c <= t)
            .min(segments.len() - 1);
        let (a, b) = segments[seg];
        let start = if seg == 0 { 0.0 } else { cumulative[seg - 1] };
        let len = a.distance(b);
        let frac = if len > 0.0 {
            ((t - start) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let along = a + (b - a) * frac;
        let normal = (b - a)
            .normalized()
            .map_or(Vec2::new(0.0, 1.0), |d| Vec2::new(-d.y, d.x));
        let p = along + normal * rng.random_range(-ASSET_CORRIDOR..=ASSET_CORRIDOR);
        assets.push(Asset {
            fmss: synthetic_fmss(k),
            x: p.x,
            y: p.y,
        });
    }
    Ok(SyntheticWorld {
        assets,
        graph_ref: Some(g.fingerprint()),
    })
}

fn synthetic_fmss(k: usize) -> FmssId {
    FmssId::new(
        format!("props/block_{:03}.ydr", k / 8),
        format!("prop_{k:05}"),
        (k % 3) as u32,
        (k % 2) as u32,
    )
}

/// Ids visible from a camera at `origin` looking along `look_dir`.
pub fn visible_from(
    origin: Vec2,
    look_dir: Vec2,
    world: &SyntheticWorld,
    vp: &VisibilityParams,
) -> BTreeSet<FmssId> {
    world
        .assets
        .iter()
        .filter(|a| vp.sees(look_dir, a.pos() - origin))
        .map(|a| a.fmss.clone())
        .collect()
}

pub fn visible_fmss(
    pose: &ViewPose,
    g: &RoadGraph,
    world: &SyntheticWorld,
    vp: &VisibilityParams,
) -> BTreeSet<FmssId> {
    match g.pos(pose.at) {
        Some(origin) => visible_from(origin, pose.look_dir, world, vp),
        None => BTreeSet::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    /// Covered fraction of the distinct ids in the world; 1.0 for an empty world.
    pub fraction: f64,
    pub covered: usize,
    pub total: usize,
    pub uncovered: BTreeSet<FmssId>,
}

pub fn coverage_of_plan(
    plan: &ViewPlan,
    g: &RoadGraph,
    world: &SyntheticWorld,
    vp: &VisibilityParams,
) -> CoverageReport {
    let all: BTreeSet<FmssId> = world.distinct_ids().into_iter().cloned().collect();
    let seen: BTreeSet<FmssId> = plan
        .poses
        .par_iter()
        .map(|p| visible_fmss(p, g, world, vp))
        .reduce(BTreeSet::new, |mut a, b| {
            a.extend(b);
            a
        });
    let uncovered: BTreeSet<FmssId> = all.difference(&seen).cloned().collect();
    let total = all.len();
    let covered = total - uncovered.len();
    let fraction = if total == 0 {
        1.0
    } else {
        covered as f64 / total as f64
    };
    CoverageReport {
        fraction,
        covered,
        total,
        uncovered,
    }
}

/// Largest eligible vertex count the exhaustive search accepts.
pub const BRUTE_FORCE_LIMIT: usize = 12;

type Bits = Vec<u64>;

fn union_into(acc: &mut Bits, other: &Bits) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a |= b;
    }
}

fn popcount(bits: &Bits) -> usize {
    bits.iter().map(|w| w.count_ones() as usize).sum()
}

struct Search {
    /// options[v]: candidate poses at the v-th eligible vertex with their visible sets
    options: Vec<Vec<(ViewPose, Bits)>>,
    flat_offset: Vec<usize>,
    compat: Vec<Vec<bool>>,
    /// suffix[v]: union of everything visible from vertices v..
    suffix: Vec<Bits>,
    max_poses: usize,
    best_count: usize,
    best_key: Vec<(u64, u64)>,
    chosen: Vec<(usize, usize)>,
}

impl Search {
    fn consider(&mut self, count: usize) {
        let key: Vec<(u64, u64)> = self
            .chosen
            .iter()
            .map(|&(v, i)| {
                let p = &self.options[v][i].0;
                (p.at.0, p.look.to.0)
            })
            .collect();
        let better = count > self.best_count
            || (count == self.best_count
                && (key.len() < self.best_key.len()
                    || (key.len() == self.best_key.len() && key < self.best_key)));
        if better {
            self.best_count = count;
            self.best_key = key;
        }
    }

    /// Visits every feasible selection whose vertices all come from `from..`
    /// on top of the current one, each exactly once.
    fn run(&mut self, from: usize, cover: &Bits) {
        self.consider(popcount(cover));
        if from == self.options.len() || self.chosen.len() == self.max_poses {
            return;
        }
        let mut bound = cover.clone();
        union_into(&mut bound, &self.suffix[from]);
        let reach = popcount(&bound);
        // every extension adds a pose, so it must strictly gain coverage to win
        if reach <= self.best_count
            && !(reach == self.best_count && self.chosen.len() < self.best_key.len())
        {
            return;
        }
        for v in from..self.options.len() {
            for i in 0..self.options[v].len() {
                let flat = self.flat_offset[v] + i;
                if !self
                    .chosen
                    .iter()
                    .all(|&(w, j)| self.compat[flat][self.flat_offset[w] + j])
                {
                    continue;
                }
                let mut next = cover.clone();
                union_into(&mut next, &self.options[v][i].1);
                self.chosen.push((v, i));
                self.run(v + 1, &next);
                self.chosen.pop();
            }
        }
    }
}

/// Exhaustive search for the feasible plan with the highest coverage, using at
/// most `max_poses` poses. Ties prefer fewer poses, then the lexicographically
/// smallest `(vertex, look target)` sequence. Only meant for small fixtures.
pub fn brute_force_best_plan(
    g: &RoadGraph,
    world: &SyntheticWorld,
    cfg: &PlanConfig,
    vp: &VisibilityParams,
    max_poses: usize,
) -> Result<ViewPlan, WorldError> {
    let part = partition_vertices(g);
    let eligible = eligible_vertices(g, &part, cfg);
    if eligible.len() > BRUTE_FORCE_LIMIT {
        return Err(WorldError::GuardExceeded {
            limit: BRUTE_FORCE_LIMIT,
            found: eligible.len(),
        });
    }

    let ids: BTreeMap<&FmssId, usize> = world
        .distinct_ids()
        .into_iter()
        .enumerate()
        .map(|(i, f)| (f, i))
        .collect();
    let words = ids.len().div_ceil(64).max(1);
    let bits_for = |pose: &ViewPose| -> Bits {
        let mut bits = vec![0u64; words];
        let origin = g.pos(pose.at).expect("eligible vertex exists");
        for a in &world.assets {
            if vp.sees(pose.look_dir, a.pos() - origin) {
                let i = ids[&a.fmss];
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        bits
    };

    let options: Vec<Vec<(ViewPose, Bits)>> = eligible
        .iter()
        .map(|&v| {
            g.neighbors(v)
                .filter_map(|nb| ViewPose::new(g, v, nb).ok())
                .map(|p| {
                    let b = bits_for(&p);
                    (p, b)
                })
                .collect()
        })
        .collect();
    let mut flat_offset = Vec::with_capacity(options.len());
    let mut flat: Vec<ViewPose> = Vec::new();
    for opts in &options {
        flat_offset.push(flat.len());
        flat.extend(opts.iter().map(|o| o.0));
    }
    let mut cache = PathCache::new(g);
    let mut compat = vec![vec![false; flat.len()]; flat.len()];
    for i in 0..flat.len() {
        for j in (i + 1)..flat.len() {
            let ok = compatible(g, &mut cache, &flat[i], &flat[j], cfg.d_min);
            compat[i][j] = ok;
            compat[j][i] = ok;
        }
    }
    let mut suffix = vec![vec![0u64; words]; options.len() + 1];
    for v in (0..options.len()).rev() {
        let mut acc = suffix[v + 1].clone();
        for (_, b) in &options[v] {
            union_into(&mut acc, b);
        }
        suffix[v] = acc;
    }

    let mut search = Search {
        options,
        flat_offset,
        compat,
        suffix,
        max_poses,
        best_count: 0,
        best_key: Vec::new(),
        chosen: Vec::new(),
    };
    search.run(0, &vec![0u64; words]);
    let poses = search
        .best_key
        .iter()
        .map(|&(at, to)| {
            ViewPose::new(g, at.into(), to.into()).expect("options come from the graph")
        })
        .collect();
    Ok(ViewPlan {
        poses,
        d_min: cfg.d_min,
        graph_ref: Some(g.fingerprint()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadgraph::{RoadEdge, RoadType, RoadVertex, VertexId};

    fn chain(n: usize, step: f64) -> RoadGraph {
        let verts = (0..n)
            .map(|i| RoadVertex {
                id: VertexId(i as u64),
                pos: Vec2::new(i as f64 * step, 0.0),
                road_type: RoadType::Major,
            })
            .collect();
        let edges = (1..n)
            .map(|i| RoadEdge::new(i as u64 - 1, i as u64))
            .collect();
        RoadGraph::new(verts, edges).unwrap()
    }

    fn asset(name: &str, x: f64, y: f64) -> Asset {
        Asset {
            fmss: FmssId::new("f", name, 0, 0),
            x,
            y,
        }
    }

    #[test]
    fn fmss_order_is_lexicographic() {
        let a = FmssId::new("a", "z", 9, 9);
        let b = FmssId::new("b", "a", 0, 0);
        let c = FmssId::new("b", "a", 0, 1);
        assert!(a < b && b < c);
    }

    #[test]
    fn generation_is_deterministic_and_counts_exactly() {
        let g = chain(11, 10.0);
        let w1 = generate_world(&g, 5.0, 42).unwrap();
        let w2 = generate_world(&g, 5.0, 42).unwrap();
        assert_eq!(w1, w2);
        assert_eq!(w1.assets.len(), 5);
        assert_ne!(w1, generate_world(&g, 5.0, 43).unwrap());
        assert!(generate_world(&g, 0.0, 1).is_err());
        assert!(generate_world(&g, -1.0, 1).is_err());
    }

    #[test]
    fn assets_stay_in_corridor() {
        let g = chain(6, 20.0);
        let w = generate_world(&g, 40.0, 7).unwrap();
        for a in &w.assets {
            assert!(a.y.abs() <= ASSET_CORRIDOR + 1e-9);
            assert!(a.x >= -1e-9 && a.x <= 100.0 + 1e-9);
        }
    }

    #[test]
    fn visibility_cone_and_range() {
        let vp = VisibilityParams::new(50.0, 90.0).unwrap();
        let w = SyntheticWorld {
            assets: vec![
                asset("ahead", 5.0, 0.0),
                asset("behind", -5.0, 0.0),
                asset("edge", 50.0, 0.0),
                asset("far", 50.5, 0.0),
            ],
            graph_ref: None,
        };
        let seen = visible_from(Vec2::ZERO, Vec2::new(1.0, 0.0), &w, &vp);
        let names: Vec<&str> = seen.iter().map(|f| f.model.as_str()).collect();
        assert_eq!(names, vec!["ahead", "edge"]);
    }

    #[test]
    fn cone_edge_is_inclusive() {
        let vp = VisibilityParams::new(100.0, 90.0).unwrap();
        assert!(vp.sees(Vec2::new(1.0, 0.0), Vec2::new(10.0, 10.0)));
        assert!(!vp.sees(Vec2::new(1.0, 0.0), Vec2::new(10.0, 10.01)));
        let all = VisibilityParams::new(100.0, 360.0).unwrap();
        assert!(all.sees(Vec2::new(1.0, 0.0), Vec2::new(-10.0, 0.0)));
    }

    #[test]
    fn visibility_params_validated() {
        assert!(VisibilityParams::new(0.0, 90.0).is_err());
        assert!(VisibilityParams::new(10.0, 0.0).is_err());
        assert!(VisibilityParams::new(10.0, 361.0).is_err());
    }

    #[test]
    fn coverage_edge_cases() {
        let g = chain(3, 10.0);
        let vp = VisibilityParams::default();
        let w = SyntheticWorld {
            assets: vec![asset("a", 15.0, 0.0)],
            graph_ref: None,
        };
        let empty = ViewPlan::empty(5.0);
        assert_eq!(coverage_of_plan(&empty, &g, &w, &vp).fraction, 0.0);
        assert_eq!(
            coverage_of_plan(&empty, &g, &SyntheticWorld::default(), &vp).fraction,
            1.0
        );
        let p = ViewPlan {
            poses: vec![ViewPose::new(&g, VertexId(1), VertexId(2)).unwrap()],
            d_min: 5.0,
            graph_ref: None,
        };
        let r = coverage_of_plan(&p, &g, &w, &vp);
        assert_eq!(r.fraction, 1.0);
        assert!(r.uncovered.is_empty());
    }

    #[test]
    fn brute_force_single_pose_world() {
        let g = chain(4, 10.0);
        let w = SyntheticWorld {
            assets: vec![asset("a", 25.0, 1.0), asset("b", 28.0, -1.0)],
            graph_ref: None,
        };
        let cfg = PlanConfig::new(5.0).unwrap();
        let best = brute_force_best_plan(&g, &w, &cfg, &VisibilityParams::default(), 4).unwrap();
        assert_eq!(best.poses.len(), 1);
        assert_eq!(best.poses[0].at, VertexId(1));
        assert_eq!(best.poses[0].look.to, VertexId(2));
        assert_eq!(
            coverage_of_plan(&best, &g, &w, &VisibilityParams::default()).fraction,
            1.0
        );
    }

    #[test]
    fn brute_force_guard() {
        let g = chain(15, 10.0);
        let err = brute_force_best_plan(
            &g,
            &SyntheticWorld::default(),
            &PlanConfig::new(5.0).unwrap(),
            &VisibilityParams::default(),
            3,
        )
        .unwrap_err();
        assert_eq!(
            err,
            WorldError::GuardExceeded {
                limit: 12,
                found: 13
            }
        );
    }

    #[test]
    fn world_json_round_trip() {
        let g = chain(5, 10.0);
        let w = generate_world(&g, 20.0, 3).unwrap();
        let back = SyntheticWorld::from_json(&w.to_json()).unwrap();
        assert_eq!(back.assets, w.assets);
    }
}

//! View pose selection on a road graph.
//!
//! A plan is a set of poses, each standing on a vertex and looking down one
//! incident edge. Two pairwise constraints make a plan admissible:
//!
//! * **separation**: every two pose vertices are strictly more than `d_min`
//!   apart (Euclidean);
//! * **look consistency**: for every two pose vertices `u`, `v` joined by a
//!   shortest path `u, u1, ..., v1, v`, exactly one of the directed edges
//!   `u -> u1` and `v -> v1` is a look edge of the plan. Put plainly, one of
//!   the two poses faces along the path toward the other and the other faces
//!   away, so consecutive views look the same way instead of at each other.
//!
//! The shortest path for a pair is always taken from the lower vertex id to
//! the higher one, which makes both checks independent of pose order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::roadgraph::{
    DistanceField, InterchangeCluster, RoadGraph, RoadType, VertexId, VertexPartition,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid plan config: {0}")]
    InvalidConfig(String),
    #[error("no vertex of an allowed road type can anchor a view")]
    NoEligibleVertices,
    #[error("plan does not match graph: {0}")]
    GraphMismatch(String),
    #[error("malformed plan JSON: {0}")]
    Json(String),
}

/// Directed look edge: the pose stands on `from` and looks toward `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LookEdge {
    pub from: VertexId,
    pub to: VertexId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewPose {
    pub at: VertexId,
    pub look: LookEdge,
    /// Unit vector along the look edge, pointing away from `at`.
    pub look_dir: Vec2,
}

impl ViewPose {
    pub fn new(g: &RoadGraph, at: VertexId, toward: VertexId) -> Result<Self, PlanError> {
        let here = g.pos(at).ok_or_else(|| {
            PlanError::GraphMismatch(format!("pose vertex {at} is not in the graph"))
        })?;
        if !g.has_edge(at, toward) {
            return Err(PlanError::GraphMismatch(format!(
                "look edge {at}->{toward} is not in the graph"
            )));
        }
        let there = g.pos(toward).expect("edge endpoints exist");
        let look_dir = (there - here).normalized().ok_or_else(|| {
            PlanError::GraphMismatch(format!("look edge {at}->{toward} has zero length"))
        })?;
        Ok(ViewPose {
            at,
            look: LookEdge {
                from: at,
                to: toward,
            },
            look_dir,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewPlan {
    pub poses: Vec<ViewPose>,
    pub d_min: f64,
    /// Fingerprint of the graph the plan was built for, when known.
    pub graph_ref: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    d_min: f64,
    poses: Vec<PoseRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRecord {
    at: u64,
    look: [u64; 2],
}

impl ViewPlan {
    pub fn empty(d_min: f64) -> Self {
        ViewPlan {
            poses: Vec::new(),
            d_min,
            graph_ref: None,
        }
    }

    /// Serializes to `{"d_min":..,"poses":[{"at":..,"look":[from,to]}]}`.
    pub fn to_json(&self) -> String {
        let file = PlanFile {
            d_min: self.d_min,
            poses: self
                .poses
                .iter()
                .map(|p| PoseRecord {
                    at: p.at.0,
                    look: [p.look.from.0, p.look.to.0],
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("plan serialization is infallible")
    }

    /// Parses a plan file and resolves its poses against `g`.
    pub fn from_json(text: &str, g: &RoadGraph) -> Result<Self, PlanError> {
        let file: PlanFile =
            serde_json::from_str(text).map_err(|e| PlanError::Json(e.to_string()))?;
        if !(file.d_min > 0.0 && file.d_min.is_finite()) {
            return Err(PlanError::InvalidConfig(format!(
                "d_min must be positive, got {}",
                file.d_min
            )));
        }
        let poses = file
            .poses
            .into_iter()
            .map(|r| {
                if r.look[0] != r.at {
                    return Err(PlanError::GraphMismatch(format!(
                        "pose at {} looks along an edge starting at {}",
                        r.at, r.look[0]
                    )));
                }
                ViewPose::new(g, VertexId(r.at), VertexId(r.look[1]))
            })
            .collect::<Result<_, _>>()?;
        Ok(ViewPlan {
            poses,
            d_min: file.d_min,
            graph_ref: Some(g.fingerprint()),
        })
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.poses.iter().map(|p| p.at)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    pub d_min: f64,
    pub allowed_road_types: BTreeSet<RoadType>,
}

impl PlanConfig {
    /// Major roads only.
    pub fn new(d_min: f64) -> Result<Self, PlanError> {
        Self::with_road_types(d_min, [RoadType::Major])
    }

    pub fn with_road_types(
        d_min: f64,
        types: impl IntoIterator<Item = RoadType>,
    ) -> Result<Self, PlanError> {
        if !(d_min > 0.0 && d_min.is_finite()) {
            return Err(PlanError::InvalidConfig(format!(
                "d_min must be positive, got {d_min}"
            )));
        }
        let allowed_road_types: BTreeSet<RoadType> = types.into_iter().collect();
        if allowed_road_types.is_empty() {
            return Err(PlanError::InvalidConfig("no allowed road types".into()));
        }
        Ok(PlanConfig {
            d_min,
            allowed_road_types,
        })
    }

    pub fn allows(&self, g: &RoadGraph, id: VertexId) -> bool {
        g.vertex(id)
            .is_some_and(|v| self.allowed_road_types.contains(&v.road_type))
    }
}

/// Vertices that may anchor a pose: allowed road type and not a dead end.
pub fn eligible_vertices(g: &RoadGraph, part: &VertexPartition, cfg: &PlanConfig) -> Vec<VertexId> {
    let mut ids: Vec<VertexId> = g
        .vertices()
        .iter()
        .filter(|v| cfg.allowed_road_types.contains(&v.road_type) && !part.is_dead(v.id))
        .map(|v| v.id)
        .collect();
    ids.sort();
    ids
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub a: VertexId,
    pub b: VertexId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckOutcome {
    Pass,
    Fail(Violation),
}

impl CheckOutcome {
    pub fn is_pass(self) -> bool {
        self == CheckOutcome::Pass
    }
}

/// Lazily built shortest-path fields keyed by target vertex.
pub(crate) struct PathCache<'g> {
    g: &'g RoadGraph,
    fields: HashMap<VertexId, DistanceField>,
}

impl<'g> PathCache<'g> {
    pub(crate) fn new(g: &'g RoadGraph) -> Self {
        PathCache {
            g,
            fields: HashMap::new(),
        }
    }

    fn path(&mut self, from: VertexId, to: VertexId) -> Option<Vec<VertexId>> {
        let g = self.g;
        let field = self
            .fields
            .entry(to)
            .or_insert_with(|| DistanceField::toward(g, to).expect("pose vertices are validated"));
        field.path_from(g, from)
    }
}

fn separated(g: &RoadGraph, a: &ViewPose, b: &ViewPose, d_min: f64) -> bool {
    let (pa, pb) = (
        g.pos(a.at).expect("validated"),
        g.pos(b.at).expect("validated"),
    );
    pa.distance(pb) > d_min
}

/// Pairwise look-consistency test; pairs without a connecting path pass.
pub(crate) fn look_consistent(cache: &mut PathCache<'_>, a: &ViewPose, b: &ViewPose) -> bool {
    let (u, v) = if a.at <= b.at { (a, b) } else { (b, a) };
    let Some(path) = cache.path(u.at, v.at) else {
        return true;
    };
    if path.len() < 2 {
        return true;
    }
    let u1 = path[1];
    let v1 = path[path.len() - 2];
    let u_into = u.look.to == u1;
    let v_into = v.look.to == v1;
    u_into != v_into
}

pub(crate) fn compatible(
    g: &RoadGraph,
    cache: &mut PathCache<'_>,
    a: &ViewPose,
    b: &ViewPose,
    d_min: f64,
) -> bool {
    separated(g, a, b, d_min) && look_consistent(cache, a, b)
}

fn validate_against(plan: &ViewPlan, g: &RoadGraph) -> Result<(), PlanError> {
    if let Some(r) = &plan.graph_ref {
        let fp = g.fingerprint();
        if *r != fp {
            return Err(PlanError::GraphMismatch(format!(
                "plan was built for graph {r}, not {fp}"
            )));
        }
    }
    for p in &plan.poses {
        if p.look.from != p.at {
            return Err(PlanError::GraphMismatch(format!(
                "pose at {} looks from {}",
                p.at, p.look.from
            )));
        }
        ViewPose::new(g, p.at, p.look.to)?;
    }
    Ok(())
}

/// Separation constraint: every two pose vertices strictly farther apart than
/// `d_min`.
pub fn check_min_separation(plan: &ViewPlan, g: &RoadGraph) -> Result<CheckOutcome, PlanError> {
    validate_against(plan, g)?;
    for (i, a) in plan.poses.iter().enumerate() {
        for b in &plan.poses[i + 1..] {
            if !separated(g, a, b, plan.d_min) {
                return Ok(CheckOutcome::Fail(Violation { a: a.at, b: b.at }));
            }
        }
    }
    Ok(CheckOutcome::Pass)
}

/// Look-consistency constraint over every pair of poses.
pub fn check_look_consistency(plan: &ViewPlan, g: &RoadGraph) -> Result<CheckOutcome, PlanError> {
    validate_against(plan, g)?;
    let mut cache = PathCache::new(g);
    for (i, a) in plan.poses.iter().enumerate() {
        for b in &plan.poses[i + 1..] {
            if !look_consistent(&mut cache, a, b) {
                return Ok(CheckOutcome::Fail(Violation { a: a.at, b: b.at }));
            }
        }
    }
    Ok(CheckOutcome::Pass)
}

/// Incident look options at `at`, best aligned with `desired` first.
fn look_options(g: &RoadGraph, at: VertexId, desired: Option<Vec2>) -> Vec<ViewPose> {
    let mut options: Vec<(f64, ViewPose)> = g
        .neighbors(at)
        .filter_map(|nb| ViewPose::new(g, at, nb).ok())
        .map(|p| (desired.map_or(0.0, |d| -d.dot(p.look_dir)), p))
        .collect();
    // stable sort keeps ascending neighbor id among equal alignments
    options.sort_by(|a, b| a.0.total_cmp(&b.0));
    options.into_iter().map(|(_, p)| p).collect()
}

struct Selector<'g> {
    g: &'g RoadGraph,
    d_min: f64,
    cache: PathCache<'g>,
    accepted: Vec<ViewPose>,
    taken: BTreeSet<VertexId>,
}

impl<'g> Selector<'g> {
    /// Accepts the first option compatible with every pose taken so far.
    fn try_place(&mut self, options: Vec<ViewPose>) -> bool {
        for cand in options {
            let ok = self
                .accepted
                .iter()
                .all(|p| compatible(self.g, &mut self.cache, p, &cand, self.d_min));
            if ok {
                self.taken.insert(cand.at);
                self.accepted.push(cand);
                return true;
            }
        }
        false
    }
}

fn cluster_map(clusters: &[InterchangeCluster]) -> HashMap<VertexId, Vec2> {
    clusters
        .iter()
        .flat_map(|c| c.member_ids.iter().map(move |&id| (id, c.direction)))
        .collect()
}

/// Greedy distance-accumulating walk.
///
/// Each connected component of allowed-type vertices is walked depth first,
/// components in ascending order of their smallest id. The walk starts at the
/// smallest-id endpoint of the component (or its smallest id when it has no
/// endpoint) and prefers the straightest continuation at forks. A pose is
/// proposed at an eligible vertex once the distance walked since the last
/// pose on the current branch exceeds `d_min`. Its look edge is the incident
/// edge best aligned with the direction of travel, or, inside an interchange
/// cluster, with the cluster axis signed to agree with the direction of
/// travel. A proposal is kept only if it is compatible with every pose kept
/// so far; other incident edges are tried in alignment order before giving
/// up. A final pass offers every remaining eligible vertex the same way.
pub fn select_viewpoints(
    g: &RoadGraph,
    part: &VertexPartition,
    clusters: &[InterchangeCluster],
    cfg: &PlanConfig,
) -> Result<ViewPlan, PlanError> {
    let eligible: BTreeSet<VertexId> = eligible_vertices(g, part, cfg).into_iter().collect();
    if eligible.is_empty() {
        return Err(PlanError::NoEligibleVertices);
    }
    let cluster_dirs = cluster_map(clusters);
    let allowed = |id: VertexId| cfg.allows(g, id);
    let walk_neighbors = |id: VertexId| g.neighbors(id).filter(move |&nb| allowed(nb));

    let mut sel = Selector {
        g,
        d_min: cfg.d_min,
        cache: PathCache::new(g),
        accepted: Vec::new(),
        taken: BTreeSet::new(),
    };
    let mut heading: HashMap<VertexId, Vec2> = HashMap::new();
    let mut visited: BTreeSet<VertexId> = BTreeSet::new();

    let mut order: Vec<VertexId> = g
        .vertices()
        .iter()
        .map(|v| v.id)
        .filter(|&id| allowed(id))
        .collect();
    order.sort();

    let desired_at = |id: VertexId, incoming: Option<Vec2>| -> Option<Vec2> {
        match (cluster_dirs.get(&id), incoming) {
            (Some(&axis), Some(inc)) => Some(if axis.dot(inc) < 0.0 { -axis } else { axis }),
            (Some(&axis), None) => Some(axis),
            (None, inc) => inc,
        }
    };

    for &seed in &order {
        if visited.contains(&seed) {
            continue;
        }
        // collect the component to find its walk start
        let mut component = vec![seed];
        let mut seen: BTreeSet<VertexId> = BTreeSet::from([seed]);
        let mut i = 0;
        while i < component.len() {
            for nb in walk_neighbors(component[i]) {
                if seen.insert(nb) {
                    component.push(nb);
                }
            }
            i += 1;
        }
        let start = seen
            .iter()
            .copied()
            .find(|&id| walk_neighbors(id).count() <= 1)
            .unwrap_or(seed);

        // (vertex, walked distance since last pose on this branch, heading)
        let mut stack: Vec<(VertexId, f64, Option<Vec2>)> = vec![(start, f64::INFINITY, None)];
        while let Some((at, mut walked, incoming)) = stack.pop() {
            if !visited.insert(at) {
                continue;
            }
            let here = g.pos(at).expect("walk stays in graph");
            let mut children: Vec<(f64, VertexId, Vec2)> = walk_neighbors(at)
                .filter(|nb| !visited.contains(nb))
                .map(|nb| {
                    let step = g.pos(nb).expect("neighbor exists") - here;
                    let dir = step
                        .normalized()
                        .or(incoming)
                        .unwrap_or(Vec2::new(1.0, 0.0));
                    let straightness = incoming.map_or(0.0, |inc| inc.dot(dir));
                    (straightness, nb, dir)
                })
                .collect();
            children.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

            let travel = incoming.or_else(|| children.first().map(|c| c.2));
            if let Some(t) = travel {
                heading.insert(at, t);
            }
            if eligible.contains(&at) && walked > cfg.d_min {
                let options = look_options(g, at, desired_at(at, travel));
                if sel.try_place(options) {
                    walked = 0.0;
                }
            }
            // push in reverse so the straightest child is walked first
            for &(_, nb, dir) in children.iter().rev() {
                let step = here.distance(g.pos(nb).expect("neighbor exists"));
                stack.push((nb, walked + step, Some(dir)));
            }
        }
    }

    for &id in &eligible {
        if sel.taken.contains(&id) {
            continue;
        }
        let options = look_options(g, id, desired_at(id, heading.get(&id).copied()));
        sel.try_place(options);
    }

    Ok(ViewPlan {
        poses: sel.accepted,
        d_min: cfg.d_min,
        graph_ref: Some(g.fingerprint()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanStats {
    pub pose_count: usize,
    /// Mean distance from each pose to its nearest other pose; absent below two poses.
    pub mean_nn_spacing: Option<f64>,
    pub by_road_type: BTreeMap<RoadType, usize>,
}

pub fn plan_stats(plan: &ViewPlan, g: &RoadGraph) -> Result<PlanStats, PlanError> {
    validate_against(plan, g)?;
    let positions: Vec<Vec2> = plan
        .poses
        .iter()
        .map(|p| g.pos(p.at).expect("validated"))
        .collect();
    let mut by_road_type = BTreeMap::new();
    for p in &plan.poses {
        *by_road_type
            .entry(g.vertex(p.at).expect("validated").road_type)
            .or_insert(0) += 1;
    }
    let mean_nn_spacing = (positions.len() >= 2).then(|| {
        let total: f64 = positions
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                positions
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &q)| p.distance(q))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        total / positions.len() as f64
    });
    Ok(PlanStats {
        pose_count: plan.poses.len(),
        mean_nn_spacing,
        by_road_type,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadgraph::{partition_vertices, RoadEdge, RoadVertex};

    fn chain(xs: &[f64]) -> RoadGraph {
        let verts = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| RoadVertex {
                id: VertexId(i as u64),
                pos: Vec2::new(x, 0.0),
                road_type: RoadType::Major,
            })
            .collect();
        let edges = (1..xs.len())
            .map(|i| RoadEdge::new(i as u64 - 1, i as u64))
            .collect();
        RoadGraph::new(verts, edges).unwrap()
    }

    fn pose(g: &RoadGraph, at: u64, to: u64) -> ViewPose {
        ViewPose::new(g, VertexId(at), VertexId(to)).unwrap()
    }

    fn plan(poses: Vec<ViewPose>, d_min: f64) -> ViewPlan {
        ViewPlan {
            poses,
            d_min,
            graph_ref: None,
        }
    }

    #[test]
    fn separation_is_strict() {
        let g = chain(&[0.0, 31.0, 62.0, 92.0]);
        let p = plan(vec![pose(&g, 1, 2), pose(&g, 2, 3)], 30.0);
        assert!(check_min_separation(&p, &g).unwrap().is_pass());
        let p = plan(vec![pose(&g, 2, 3), pose(&g, 3, 2)], 30.0);
        assert_eq!(
            check_min_separation(&p, &g).unwrap(),
            CheckOutcome::Fail(Violation {
                a: VertexId(2),
                b: VertexId(3)
            })
        );
        let p = plan(vec![pose(&g, 1, 2)], 30.0);
        assert!(check_min_separation(&p, &g).unwrap().is_pass());
    }

    #[test]
    fn look_consistency_xor() {
        // u=0 - a=1 - b=2 - v=3, plus a tail so v can look outward
        let g = chain(&[0.0, 10.0, 20.0, 30.0, 40.0]);
        let same_way = plan(vec![pose(&g, 0, 1), pose(&g, 3, 4)], 5.0);
        assert!(check_look_consistency(&same_way, &g).unwrap().is_pass());
        let facing = plan(vec![pose(&g, 0, 1), pose(&g, 3, 2)], 5.0);
        assert!(!check_look_consistency(&facing, &g).unwrap().is_pass());
        let single = plan(vec![pose(&g, 2, 1)], 5.0);
        assert!(check_look_consistency(&single, &g).unwrap().is_pass());
    }

    #[test]
    fn mismatched_plan_is_an_error() {
        let g = chain(&[0.0, 10.0]);
        let other = chain(&[0.0, 10.0, 20.0]);
        let p = plan(vec![pose(&other, 2, 1)], 5.0);
        assert!(matches!(
            check_min_separation(&p, &g),
            Err(PlanError::GraphMismatch(_))
        ));
        let mut q = plan(vec![pose(&g, 0, 1)], 5.0);
        q.graph_ref = Some(other.fingerprint());
        assert!(matches!(
            check_look_consistency(&q, &g),
            Err(PlanError::GraphMismatch(_))
        ));
    }

    #[test]
    fn small_graph_gets_one_pose() {
        let g = chain(&[0.0, 5.0, 10.0, 15.0]);
        let part = partition_vertices(&g);
        let p = select_viewpoints(&g, &part, &[], &PlanConfig::new(30.0).unwrap()).unwrap();
        assert_eq!(p.poses.len(), 1);
    }

    #[test]
    fn dirt_only_graph_has_no_eligible_vertices() {
        let verts = (0..3)
            .map(|i| RoadVertex {
                id: VertexId(i),
                pos: Vec2::new(i as f64 * 10.0, 0.0),
                road_type: RoadType::Dirt,
            })
            .collect();
        let g = RoadGraph::new(
            verts,
            vec![RoadEdge::new(0u64, 1u64), RoadEdge::new(1u64, 2u64)],
        )
        .unwrap();
        let part = partition_vertices(&g);
        let err = select_viewpoints(&g, &part, &[], &PlanConfig::new(30.0).unwrap()).unwrap_err();
        assert_eq!(err, PlanError::NoEligibleVertices);
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(PlanConfig::new(0.0).is_err());
        assert!(PlanConfig::new(f64::NAN).is_err());
        assert!(PlanConfig::with_road_types(5.0, []).is_err());
    }

    #[test]
    fn stats_of_empty_and_pair() {
        let g = chain(&[0.0, 40.0, 80.0]);
        let s = plan_stats(&ViewPlan::empty(10.0), &g).unwrap();
        assert_eq!(s.pose_count, 0);
        assert_eq!(s.mean_nn_spacing, None);
        let s = plan_stats(&plan(vec![pose(&g, 0, 1), pose(&g, 1, 2)], 10.0), &g).unwrap();
        assert_eq!(s.mean_nn_spacing, Some(40.0));
        assert_eq!(s.by_road_type.get(&RoadType::Major), Some(&2));
    }

    #[test]
    fn json_round_trip() {
        let g = chain(&[0.0, 40.0, 80.0]);
        let p = plan(vec![pose(&g, 1, 2)], 30.0);
        let text = p.to_json();
        let back = ViewPlan::from_json(&text, &g).unwrap();
        assert_eq!(back.poses, p.poses);
        assert_eq!(back.d_min, 30.0);
        let bad = r#"{"d_min":30,"poses":[{"at":1,"look":[2,1]}]}"#;
        assert!(matches!(
            ViewPlan::from_json(bad, &g),
            Err(PlanError::GraphMismatch(_))
        ));
    }
}

//! Road network model: ingestion, degree partitioning, shortest paths,
//! interchange clustering and road direction estimation.

mod dbscan;
mod direction;
mod paths;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::Vec2;

pub use dbscan::{dbscan, DbscanResult};
pub use direction::{estimate_direction, DegeneratePoints};
pub use paths::{shortest_path, DistanceField};

/// Default neighborhood radius for grouping the vertices of one interchange.
pub const DEFAULT_CLUSTER_EPS: f64 = 25.0;
/// Default DBSCAN density threshold.
pub const DEFAULT_CLUSTER_MIN_PTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u64);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for VertexId {
    fn from(v: u64) -> Self {
        VertexId(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoadType {
    Major,
    Minor,
    Dirt,
    Alley,
}

impl RoadType {
    pub const ALL: [RoadType; 4] = [
        RoadType::Major,
        RoadType::Minor,
        RoadType::Dirt,
        RoadType::Alley,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoadType::Major => "major",
            RoadType::Minor => "minor",
            RoadType::Dirt => "dirt",
            RoadType::Alley => "alley",
        }
    }
}

impl std::str::FromStr for RoadType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RoadType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown road type {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadVertex {
    pub id: VertexId,
    pub pos: Vec2,
    pub road_type: RoadType,
}

/// Undirected edge between two distinct vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoadEdge {
    pub a: VertexId,
    pub b: VertexId,
}

impl RoadEdge {
    pub fn new(a: impl Into<VertexId>, b: impl Into<VertexId>) -> Self {
        RoadEdge {
            a: a.into(),
            b: b.into(),
        }
    }

    fn key(self) -> (VertexId, VertexId) {
        if self.a <= self.b {
            (self.a, self.b)
        } else {
            (self.b, self.a)
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("malformed graph JSON at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("vertices[{index}]: duplicate vertex id {id}")]
    DuplicateVertex { index: usize, id: VertexId },
    #[error("vertices[{index}]: non-finite position for vertex {id}")]
    NonFinitePosition { index: usize, id: VertexId },
    #[error("edges[{index}]: endpoint {id} does not name a vertex")]
    DanglingEndpoint { index: usize, id: VertexId },
    #[error("edges[{index}]: self loop on vertex {id}")]
    SelfLoop { index: usize, id: VertexId },
    #[error("edges[{index}]: duplicate edge {a}-{b}")]
    DuplicateEdge {
        index: usize,
        a: VertexId,
        b: VertexId,
    },
    #[error("unknown vertex id {0}")]
    UnknownVertex(VertexId),
    #[error("I/O error reading graph: {0}")]
    Io(String),
}

/// Validated road graph with an adjacency index.
///
/// Vertices keep their input order; adjacency lists are sorted by neighbor id
/// so every traversal over them is deterministic.
#[derive(Debug, Clone)]
pub struct RoadGraph {
    vertices: Vec<RoadVertex>,
    edges: Vec<RoadEdge>,
    index: HashMap<VertexId, usize>,
    adjacency: Vec<Vec<usize>>,
}

impl RoadGraph {
    pub fn new(vertices: Vec<RoadVertex>, edges: Vec<RoadEdge>) -> Result<Self, GraphError> {
        let mut index = HashMap::with_capacity(vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            if !v.pos.is_finite() {
                return Err(GraphError::NonFinitePosition { index: i, id: v.id });
            }
            if index.insert(v.id, i).is_some() {
                return Err(GraphError::DuplicateVertex { index: i, id: v.id });
            }
        }
        let mut adjacency = vec![Vec::new(); vertices.len()];
        let mut seen = BTreeSet::new();
        for (i, e) in edges.iter().enumerate() {
            let ia = *index
                .get(&e.a)
                .ok_or(GraphError::DanglingEndpoint { index: i, id: e.a })?;
            let ib = *index
                .get(&e.b)
                .ok_or(GraphError::DanglingEndpoint { index: i, id: e.b })?;
            if ia == ib {
                return Err(GraphError::SelfLoop { index: i, id: e.a });
            }
            if !seen.insert(e.key()) {
                return Err(GraphError::DuplicateEdge {
                    index: i,
                    a: e.a,
                    b: e.b,
                });
            }
            adjacency[ia].push(ib);
            adjacency[ib].push(ia);
        }
        for list in &mut adjacency {
            list.sort_by_key(|&j| vertices[j].id);
        }
        Ok(RoadGraph {
            vertices,
            edges,
            index,
            adjacency,
        })
    }

    pub fn vertices(&self) -> &[RoadVertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[RoadEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, id: VertexId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn vertex(&self, id: VertexId) -> Option<&RoadVertex> {
        self.index.get(&id).map(|&i| &self.vertices[i])
    }

    pub fn pos(&self, id: VertexId) -> Option<Vec2> {
        self.vertex(id).map(|v| v.pos)
    }

    pub fn degree(&self, id: VertexId) -> Option<usize> {
        self.index.get(&id).map(|&i| self.adjacency[i].len())
    }

    /// Neighbor ids in ascending order.
    pub fn neighbors(&self, id: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        let slot = self.index.get(&id).copied();
        slot.into_iter()
            .flat_map(move |i| self.adjacency[i].iter().map(move |&j| self.vertices[j].id))
    }

    pub fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        match (self.index.get(&a), self.index.get(&b)) {
            (Some(&ia), Some(&ib)) => self.adjacency[ia].contains(&ib),
            _ => false,
        }
    }

    pub(crate) fn slot(&self, id: VertexId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub(crate) fn adjacency_slots(&self, slot: usize) -> &[usize] {
        &self.adjacency[slot]
    }

    /// Stable content digest, used to tie plans and worlds to their source graph.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        let mut verts: Vec<&RoadVertex> = self.vertices.iter().collect();
        verts.sort_by_key(|v| v.id);
        for v in verts {
            hasher.update(v.id.0.to_le_bytes());
            hasher.update(v.pos.x.to_bits().to_le_bytes());
            hasher.update(v.pos.y.to_bits().to_le_bytes());
            hasher.update([v.road_type as u8]);
        }
        let mut keys: Vec<_> = self.edges.iter().map(|e| e.key()).collect();
        keys.sort();
        for (a, b) in keys {
            hasher.update(a.0.to_le_bytes());
            hasher.update(b.0.to_le_bytes());
        }
        hasher.finalize()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexRecord {
                    id: v.id.0,
                    x: v.pos.x,
                    y: v.pos.y,
                    road_type: v.road_type,
                })
                .collect(),
            edges: self.edges.iter().map(|e| [e.a.0, e.b.0]).collect(),
        };
        serde_json::to_string_pretty(&file).expect("graph serialization is infallible")
    }
}

#[derive(Serialize, Deserialize)]
struct VertexRecord {
    id: u64,
    x: f64,
    y: f64,
    road_type: RoadType,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    vertices: Vec<VertexRecord>,
    edges: Vec<[u64; 2]>,
}

/// Reads the graph JSON format:
/// `{"vertices":[{"id","x","y","road_type"}], "edges":[[a,b]]}`.
pub fn parse_road_graph<R: Read>(mut source: R) -> Result<RoadGraph, GraphError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| GraphError::Io(e.to_string()))?;
    let file: GraphFile = serde_json::from_str(&text).map_err(|e| GraphError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let vertices = file
        .vertices
        .into_iter()
        .map(|r| RoadVertex {
            id: VertexId(r.id),
            pos: Vec2::new(r.x, r.y),
            road_type: r.road_type,
        })
        .collect();
    let edges = file
        .edges
        .into_iter()
        .map(|[a, b]| RoadEdge::new(a, b))
        .collect();
    RoadGraph::new(vertices, edges)
}

/// Degree-based split of the vertex set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VertexPartition {
    /// Degree exactly 2: plain road sections.
    pub simple: BTreeSet<VertexId>,
    /// Degree above 2: merges and intersections.
    pub complex: BTreeSet<VertexId>,
    /// Degree below 2: dead ends and isolated vertices.
    pub dead: BTreeSet<VertexId>,
}

impl VertexPartition {
    pub fn is_dead(&self, id: VertexId) -> bool {
        self.dead.contains(&id)
    }
}

pub fn partition_vertices(g: &RoadGraph) -> VertexPartition {
    let mut part = VertexPartition::default();
    for (slot, v) in g.vertices.iter().enumerate() {
        match g.adjacency[slot].len() {
            0 | 1 => part.dead.insert(v.id),
            2 => part.simple.insert(v.id),
            _ => part.complex.insert(v.id),
        };
    }
    part
}

/// A group of nearby complex vertices forming one physical interchange.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterchangeCluster {
    pub member_ids: BTreeSet<VertexId>,
    /// Principal road axis through the interchange; the sign carries no meaning.
    pub direction: Vec2,
    pub centroid: Vec2,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InterchangeClustering {
    pub clusters: Vec<InterchangeCluster>,
    pub noise: BTreeSet<VertexId>,
}

impl InterchangeClustering {
    pub fn cluster_of(&self, id: VertexId) -> Option<&InterchangeCluster> {
        self.clusters.iter().find(|c| c.member_ids.contains(&id))
    }
}

/// Runs DBSCAN over the positions of the complex vertices and attaches a
/// road direction to every cluster.
///
/// A cluster whose members are all coincident has no spread to regress on; its
/// direction is then estimated from the members together with their graph
/// neighbors, which always span at least one road axis for a complex vertex.
pub fn cluster_interchanges(
    g: &RoadGraph,
    part: &VertexPartition,
    eps: f64,
    min_pts: usize,
) -> InterchangeClustering {
    let points: Vec<(VertexId, Vec2)> = part
        .complex
        .iter()
        .filter_map(|&id| g.pos(id).map(|p| (id, p)))
        .collect();
    let result = dbscan(&points, eps, min_pts);
    let clusters = result
        .clusters
        .into_iter()
        .map(|members| {
            let positions: Vec<Vec2> = members.iter().filter_map(|&id| g.pos(id)).collect();
            let n = positions.len() as f64;
            let centroid = positions.iter().fold(Vec2::ZERO, |acc, &p| acc + p) * (1.0 / n);
            let direction = estimate_direction(&positions).unwrap_or_else(|_| {
                let mut spread = positions.clone();
                for &id in &members {
                    spread.extend(g.neighbors(id).filter_map(|nb| g.pos(nb)));
                }
                estimate_direction(&spread).unwrap_or(Vec2::new(1.0, 0.0))
            });
            InterchangeCluster {
                member_ids: members.into_iter().collect(),
                direction,
                centroid,
            }
        })
        .collect();
    InterchangeClustering {
        clusters,
        noise: result.noise.into_iter().collect(),
    }
}

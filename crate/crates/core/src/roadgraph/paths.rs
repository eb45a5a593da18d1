use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{GraphError, RoadGraph, VertexId};

#[derive(Clone, Copy)]
struct Frontier {
    dist: f64,
    slot: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    // min-heap on distance
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.slot.cmp(&self.slot))
    }
}

/// Euclidean distances from every vertex to one target vertex.
///
/// Paths read off the field step, at every vertex, to the lowest-id neighbor
/// that lies on some shortest path, so equal-length alternatives resolve the
/// same way on every run.
#[derive(Debug, Clone)]
pub struct DistanceField {
    target: usize,
    dist: Vec<f64>,
    parent: Vec<Option<usize>>,
}

impl DistanceField {
    pub fn toward(g: &RoadGraph, target: VertexId) -> Result<Self, GraphError> {
        let target = g.slot(target).ok_or(GraphError::UnknownVertex(target))?;
        let n = g.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![None; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[target] = 0.0;
        heap.push(Frontier {
            dist: 0.0,
            slot: target,
        });
        while let Some(Frontier { dist: d, slot }) = heap.pop() {
            if done[slot] {
                continue;
            }
            done[slot] = true;
            let here = g.vertices()[slot].pos;
            for &next in g.adjacency_slots(slot) {
                let cand = d + here.distance(g.vertices()[next].pos);
                if cand < dist[next] {
                    dist[next] = cand;
                    parent[next] = Some(slot);
                    heap.push(Frontier {
                        dist: cand,
                        slot: next,
                    });
                }
            }
        }
        Ok(DistanceField {
            target,
            dist,
            parent,
        })
    }

    pub fn distance_from(&self, g: &RoadGraph, source: VertexId) -> Option<f64> {
        let d = self.dist[g.slot(source)?];
        d.is_finite().then_some(d)
    }

    /// Vertex sequence from `source` to the target, both inclusive.
    pub fn path_from(&self, g: &RoadGraph, source: VertexId) -> Option<Vec<VertexId>> {
        let mut at = g.slot(source)?;
        if !self.dist[at].is_finite() {
            return None;
        }
        let verts = g.vertices();
        let mut on_path = vec![false; verts.len()];
        let mut path = vec![verts[at].id];
        on_path[at] = true;
        while at != self.target {
            let here = verts[at].pos;
            let tol = 1e-9 * self.dist[at].max(1.0);
            // adjacency is sorted by id, so the first admissible neighbor wins ties
            let step = g
                .adjacency_slots(at)
                .iter()
                .copied()
                .find(|&nb| {
                    !on_path[nb]
                        && self.dist[nb] + here.distance(verts[nb].pos) <= self.dist[at] + tol
                })
                .or(self.parent[at])?;
            at = step;
            on_path[at] = true;
            path.push(verts[at].id);
        }
        Some(path)
    }
}

/// Minimum total-length path from `u` to `v`, inclusive of both endpoints;
/// `None` when they lie in different components.
pub fn shortest_path(
    g: &RoadGraph,
    u: VertexId,
    v: VertexId,
) -> Result<Option<Vec<VertexId>>, GraphError> {
    if !g.contains(u) {
        return Err(GraphError::UnknownVertex(u));
    }
    Ok(DistanceField::toward(g, v)?.path_from(g, u))
}

//! Random road networks for demos and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Vec2;
use crate::roadgraph::{RoadEdge, RoadGraph, RoadType, RoadVertex};

/// A jittered grid of `n` vertices with randomly dropped links and mixed road
/// types. Same `(n, seed)` gives the same graph.
pub fn random_road_graph(n: usize, seed: u64) -> RoadGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
    let spacing = rng.random_range(15.0..60.0);
    let jitter = 0.35 * spacing;
    let vertices: Vec<RoadVertex> = (0..n)
        .map(|i| {
            let base = Vec2::new((i % cols) as f64 * spacing, (i / cols) as f64 * spacing);
            let pos = base
                + Vec2::new(
                    rng.random_range(-jitter..jitter),
                    rng.random_range(-jitter..jitter),
                );
            let road_type = match rng.random_range(0..10) {
                0..=5 => RoadType::Major,
                6 | 7 => RoadType::Minor,
                8 => RoadType::Dirt,
                _ => RoadType::Alley,
            };
            RoadVertex {
                id: (i as u64).into(),
                pos,
                road_type,
            }
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        let c = i % cols;
        let right = i + 1;
        let down = i + cols;
        if c + 1 < cols && right < n && rng.random_bool(0.75) {
            edges.push(RoadEdge::new(i as u64, right as u64));
        }
        if down < n && rng.random_bool(0.65) {
            edges.push(RoadEdge::new(i as u64, down as u64));
        }
        if c + 1 < cols && down + 1 < n && rng.random_bool(0.1) {
            edges.push(RoadEdge::new(i as u64, (down + 1) as u64));
        }
    }
    RoadGraph::new(vertices, edges).expect("generated graph is valid")
}

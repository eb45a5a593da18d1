//! Density-based clustering (DBSCAN) over keyed planar points.
//!
//! Neighborhoods are closed balls (`distance <= eps`) that include the query
//! point itself; a point is core when its neighborhood holds at least
//! `min_pts` points. Clusters are the connected components of core points,
//! and each border point joins the cluster of its nearest core point (ties go
//! to the core with the smaller key). With that rule the result depends only
//! on the set of points, never on their input order.

use std::collections::{HashMap, VecDeque};

use crate::geometry::Vec2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbscanResult<K> {
    /// Member keys of each cluster, ascending; clusters ordered by smallest key.
    pub clusters: Vec<Vec<K>>,
    /// Keys of noise points, ascending.
    pub noise: Vec<K>,
}

struct Grid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(points: &[Vec2], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, &p) in points.iter().enumerate() {
            buckets.entry(Self::cell_of(p, cell)).or_default().push(i);
        }
        Grid { cell, buckets }
    }

    fn cell_of(p: Vec2, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    fn neighbors(&self, points: &[Vec2], i: usize, eps: f64, out: &mut Vec<usize>) {
        out.clear();
        let (cx, cy) = Self::cell_of(points[i], self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.buckets.get(&(cx + dx, cy + dy)) {
                    out.extend(
                        bucket
                            .iter()
                            .copied()
                            .filter(|&j| points[i].distance(points[j]) <= eps),
                    );
                }
            }
        }
        out.sort_unstable();
    }
}

pub fn dbscan<K: Ord + Copy>(points: &[(K, Vec2)], eps: f64, min_pts: usize) -> DbscanResult<K> {
    assert!(
        eps > 0.0 && eps.is_finite(),
        "eps must be positive and finite"
    );
    assert!(min_pts >= 1, "min_pts must be at least 1");

    let mut sorted: Vec<(K, Vec2)> = points.to_vec();
    sorted.sort_by_key(|a| a.0);
    let keys: Vec<K> = sorted.iter().map(|p| p.0).collect();
    let pos: Vec<Vec2> = sorted.iter().map(|p| p.1).collect();
    let n = pos.len();

    let grid = Grid::new(&pos, eps);
    let mut hood = Vec::new();
    let neighborhoods: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            grid.neighbors(&pos, i, eps, &mut hood);
            hood.clone()
        })
        .collect();
    let core: Vec<bool> = neighborhoods.iter().map(|h| h.len() >= min_pts).collect();

    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut cluster_count = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if !core[start] || label[start].is_some() {
            continue;
        }
        label[start] = Some(cluster_count);
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for &j in &neighborhoods[i] {
                if core[j] && label[j].is_none() {
                    label[j] = Some(cluster_count);
                    queue.push_back(j);
                }
            }
        }
        cluster_count += 1;
    }

    for i in 0..n {
        if core[i] {
            continue;
        }
        let nearest = neighborhoods[i]
            .iter()
            .copied()
            .filter(|&j| core[j])
            .min_by(|&a, &b| {
                pos[i]
                    .distance(pos[a])
                    .total_cmp(&pos[i].distance(pos[b]))
                    .then(a.cmp(&b))
            });
        label[i] = nearest.and_then(|j| label[j]);
    }

    let mut clusters: Vec<Vec<K>> = vec![Vec::new(); cluster_count];
    let mut noise = Vec::new();
    for i in 0..n {
        match label[i] {
            Some(c) => clusters[c].push(keys[i]),
            None => noise.push(keys[i]),
        }
    }
    clusters.sort_by(|a, b| a[0].cmp(&b[0]));
    DbscanResult { clusters, noise }
}

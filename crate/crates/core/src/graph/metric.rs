use std::collections::VecDeque;

use super::{VertexSet, WeightedGraph};
use crate::error::Result;

/// Number of distance shells in the open ball of real radius `r`:
/// `B(x, r) = {y : d(x, y) < ball_extent(r)}`. Non-integer radii round up, so
/// `B(x, 8/7)` has the vertex content of `B(x, 2)`.
pub fn ball_extent(r: f64) -> usize {
    if !(r > 0.0) {
        return 0;
    }
    let nearest = r.round();
    if (r - nearest).abs() <= 1e-9 * r.max(1.0) {
        nearest as usize
    } else {
        r.ceil() as usize
    }
}

/// Full BFS distance vector from `x`.
pub fn distances_from(g: &WeightedGraph, x: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.vertex_count()];
    dist[x] = 0;
    let mut queue = VecDeque::from([x]);
    while let Some(v) = queue.pop_front() {
        for &w in g.neighbor_ids(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Vertices at distance `< limit` from `x`, in BFS order, with their distances.
pub fn bfs_within(g: &WeightedGraph, x: usize, limit: usize) -> Vec<(usize, usize)> {
    if limit == 0 {
        return Vec::new();
    }
    let mut out = vec![(x, 0)];
    let mut seen = std::collections::HashSet::from([x]);
    let mut head = 0;
    while head < out.len() {
        let (v, d) = out[head];
        head += 1;
        if d + 1 >= limit {
            continue;
        }
        for &w in g.neighbor_ids(v) {
            if seen.insert(w) {
                out.push((w, d + 1));
            }
        }
    }
    out
}

/// Graph distance d(x, y).
pub fn distance(g: &WeightedGraph, x: usize, y: usize) -> Result<usize> {
    g.check_vertex(x)?;
    g.check_vertex(y)?;
    if x == y {
        return Ok(0);
    }
    // bidirectional search is unnecessary at these sizes
    Ok(distances_from(g, x)[y])
}

/// Open ball B(x, R) = {y : d(x, y) < R}.
pub fn ball(g: &WeightedGraph, x: usize, radius: f64) -> VertexSet {
    let members = bfs_within(g, x, ball_extent(radius)).into_iter().map(|(v, _)| v);
    VertexSet::from_members(g.vertex_count(), members).with_shape(x, radius)
}

/// Sphere S(x, R) = {y : d(x, y) = R}.
pub fn sphere(g: &WeightedGraph, x: usize, radius: usize) -> VertexSet {
    let members = bfs_within(g, x, radius + 1)
        .into_iter()
        .filter(|&(_, d)| d == radius)
        .map(|(v, _)| v);
    VertexSet::from_members(g.vertex_count(), members).with_shape(x, radius as f64)
}

#[derive(Debug, Clone)]
pub struct MetricSets {
    pub ball: VertexSet,
    /// Empty when `R` is not an integer.
    pub sphere: VertexSet,
    pub closure: VertexSet,
    pub boundary: VertexSet,
}

/// Ball, sphere, closure and boundary of `B(x, R)` in one pass.
pub fn metric_sets(g: &WeightedGraph, x: usize, radius: f64) -> Result<MetricSets> {
    g.check_vertex(x)?;
    let ball = ball(g, x, radius);
    let extent = ball_extent(radius);
    let sphere = if (radius - extent as f64).abs() <= 1e-9 * radius.max(1.0) {
        sphere(g, x, extent)
    } else {
        VertexSet::empty(g.vertex_count())
    };
    let closure = ball.closure(g);
    let boundary = ball.boundary(g);
    Ok(MetricSets { ball, sphere, closure, boundary })
}

/// V(x, R) = μ(B(x, R)).
pub fn volume(g: &WeightedGraph, x: usize, radius: f64) -> f64 {
    g.measure_of(ball(g, x, radius).members())
}

/// π_{x,y}: every vertex lying on some geodesic between `x` and `y`.
pub fn shortest_path_union(g: &WeightedGraph, x: usize, y: usize) -> Result<VertexSet> {
    g.check_vertex(x)?;
    g.check_vertex(y)?;
    let from_x = distances_from(g, x);
    let from_y = distances_from(g, y);
    let d = from_x[y];
    let members = (0..g.vertex_count()).filter(|&v| from_x[v] + from_y[v] == d);
    Ok(VertexSet::from_members(g.vertex_count(), members))
}

/// p₀ = min over edges of P(x, y), both orientations.
pub fn p0_check(g: &WeightedGraph) -> f64 {
    g.edges()
        .iter()
        .map(|e| (e.weight / g.measure(e.u)).min(e.weight / g.measure(e.v)))
        .fold(f64::INFINITY, f64::min)
}

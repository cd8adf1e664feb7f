//! Weighted graphs, vertex sets and the metric structure the walk lives on.
//!
//! A [`WeightedGraph`] is immutable once built. Infinite graphs are modelled by
//! finite truncations that remember which vertices sit on the cut
//! ([`WeightedGraph::truncation_boundary`]); [`InteriorMargin`] decides whether a
//! computation at `(x, R)` stays clear of that cut.

mod generate;
mod io;
mod metric;

pub use generate::{generate, Family, GenerateOptions, GraphSpec, MAX_VERTICES};
pub use io::{parse_edge_list, read_graph_file, write_edge_list, write_graph_file};
pub use metric::{
    ball, ball_extent, bfs_within, distance, distances_from, metric_sets, p0_check,
    shortest_path_union, sphere, volume, MetricSets,
};

use crate::error::{Error, GraphError, Result};

/// An undirected edge with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Finite, connected, symmetric positively weighted graph without loops or
/// multiple edges. `μ(x)` is cached as the sum of incident weights.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    measure: Vec<f64>,
    boundary: Vec<usize>,
}

impl WeightedGraph {
    /// Builds a graph on `vertex_count` vertices. Edges may be given in either
    /// orientation; they are canonicalized to `u < v` and sorted.
    pub fn from_edges(
        vertex_count: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        truncation_boundary: impl IntoIterator<Item = usize>,
    ) -> Result<Self, GraphError> {
        let mut canon = Vec::new();
        for (i, (a, b, w)) in edges.into_iter().enumerate() {
            let line = i + 1;
            if a == b {
                return Err(GraphError::SelfLoop { line, vertex: a as u64 });
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(GraphError::NonPositiveWeight { line, weight: w });
            }
            if a >= vertex_count || b >= vertex_count {
                return Err(GraphError::Parse {
                    line,
                    message: format!("vertex id out of range 0..{vertex_count}"),
                });
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            canon.push((line, Edge { u, v, weight: w }));
        }
        if canon.is_empty() {
            return Err(GraphError::Empty);
        }
        canon.sort_by_key(|(_, e)| (e.u, e.v));
        for pair in canon.windows(2) {
            let (a, b) = (&pair[0].1, &pair[1].1);
            if a.u == b.u && a.v == b.v {
                let line = pair[0].0.max(pair[1].0);
                return Err(GraphError::DuplicateEdge { line, u: a.u as u64, v: a.v as u64 });
            }
        }
        let edges: Vec<Edge> = canon.into_iter().map(|(_, e)| e).collect();

        let mut degree = vec![0usize; vertex_count];
        for e in &edges {
            degree[e.u] += 1;
            degree[e.v] += 1;
        }
        let mut offsets = Vec::with_capacity(vertex_count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..vertex_count].to_vec();
        let mut targets = vec![0; offsets[vertex_count]];
        let mut weights = vec![0.0; offsets[vertex_count]];
        for e in &edges {
            targets[fill[e.u]] = e.v;
            weights[fill[e.u]] = e.weight;
            fill[e.u] += 1;
            targets[fill[e.v]] = e.u;
            weights[fill[e.v]] = e.weight;
            fill[e.v] += 1;
        }
        // neighbor lists sorted by id keep every traversal deterministic
        for x in 0..vertex_count {
            let (s, t) = (offsets[x], offsets[x + 1]);
            let mut pairs: Vec<(usize, f64)> =
                targets[s..t].iter().copied().zip(weights[s..t].iter().copied()).collect();
            pairs.sort_by_key(|p| p.0);
            for (k, (y, w)) in pairs.into_iter().enumerate() {
                targets[s + k] = y;
                weights[s + k] = w;
            }
        }
        let measure = (0..vertex_count)
            .map(|x| weights[offsets[x]..offsets[x + 1]].iter().sum())
            .collect();

        let mut boundary: Vec<usize> = truncation_boundary.into_iter().collect();
        boundary.sort_unstable();
        boundary.dedup();
        if let Some(&b) = boundary.iter().find(|&&b| b >= vertex_count) {
            return Err(GraphError::InvalidOption(format!("boundary vertex {b} out of range")));
        }

        let g = WeightedGraph { edges, offsets, targets, weights, measure, boundary };
        let components = g.component_count();
        if components != 1 {
            return Err(GraphError::Disconnected { components });
        }
        Ok(g)
    }

    fn component_count(&self) -> usize {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(x) = stack.pop() {
                for &y in self.neighbor_ids(x) {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        count
    }

    pub fn vertex_count(&self) -> usize {
        self.measure.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list, sorted by `(u, v)` with `u < v`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Vertex measure μ(x).
    pub fn measure(&self, x: usize) -> f64 {
        self.measure[x]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    /// μ(A) for a set of vertices.
    pub fn measure_of<'a>(&self, set: impl IntoIterator<Item = &'a usize>) -> f64 {
        set.into_iter().map(|&x| self.measure[x]).sum()
    }

    pub fn degree(&self, x: usize) -> usize {
        self.offsets[x + 1] - self.offsets[x]
    }

    pub fn neighbor_ids(&self, x: usize) -> &[usize] {
        &self.targets[self.offsets[x]..self.offsets[x + 1]]
    }

    /// Neighbors of `x` with the connecting edge weight μ_{xy}.
    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[x]..self.offsets[x + 1];
        self.targets[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    /// Edge weight μ_{xy}, zero when `x` and `y` are not adjacent.
    pub fn weight(&self, x: usize, y: usize) -> f64 {
        let r = self.offsets[x]..self.offsets[x + 1];
        match self.targets[r.clone()].binary_search(&y) {
            Ok(k) => self.weights[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// One-step transition probability P(x, y) = μ_{xy} / μ(x).
    pub fn transition(&self, x: usize, y: usize) -> f64 {
        self.weight(x, y) / self.measure[x]
    }

    /// Vertices where a generator cut an infinite graph.
    pub fn truncation_boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn check_vertex(&self, x: usize) -> Result<()> {
        if x < self.vertex_count() {
            Ok(())
        } else {
            Err(Error::InvalidVertex { vertex: x, count: self.vertex_count() })
        }
    }

    /// Distance from `x` to the nearest truncation-boundary vertex, if any.
    pub fn distance_to_truncation(&self, x: usize) -> Option<usize> {
        if self.boundary.is_empty() {
            return None;
        }
        let dist = distances_from(self, x);
        self.boundary.iter().map(|&b| dist[b]).min()
    }
}

/// A set of vertices with dense membership, optionally tagged as a ball or
/// sphere around `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSet {
    mask: Vec<bool>,
    members: Vec<usize>,
    pub center: Option<usize>,
    pub radius: Option<f64>,
}

impl VertexSet {
    pub fn empty(vertex_count: usize) -> Self {
        VertexSet { mask: vec![false; vertex_count], members: Vec::new(), center: None, radius: None }
    }

    pub fn from_members(vertex_count: usize, members: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(vertex_count);
        for x in members {
            set.insert(x);
        }
        set.members.sort_unstable();
        set
    }

    pub fn full(vertex_count: usize) -> Self {
        Self::from_members(vertex_count, 0..vertex_count)
    }

    fn insert(&mut self, x: usize) {
        if !self.mask[x] {
            self.mask[x] = true;
            self.members.push(x);
        }
    }

    pub(crate) fn with_shape(mut self, center: usize, radius: f64) -> Self {
        self.center = Some(center);
        self.radius = Some(radius);
        self
    }

    #[inline]
    pub fn contains(&self, x: usize) -> bool {
        self.mask.get(x).copied().unwrap_or(false)
    }

    /// Members in increasing id order.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    /// Ā = A ∪ {y : y ∼ x for some x ∈ A}.
    pub fn closure(&self, g: &WeightedGraph) -> VertexSet {
        let mut out = VertexSet::from_members(self.universe(), self.members.iter().copied());
        for &x in &self.members {
            for &y in g.neighbor_ids(x) {
                out.insert(y);
            }
        }
        out.members.sort_unstable();
        out
    }

    /// ∂A = Ā \ A.
    pub fn boundary(&self, g: &WeightedGraph) -> VertexSet {
        let closure = self.closure(g);
        VertexSet::from_members(
            self.universe(),
            closure.members.into_iter().filter(|&y| !self.contains(y)),
        )
    }

    pub fn complement(&self) -> VertexSet {
        VertexSet::from_members(self.universe(), (0..self.universe()).filter(|&x| !self.mask[x]))
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        VertexSet::from_members(
            self.universe(),
            self.members.iter().chain(other.members.iter()).copied(),
        )
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        VertexSet::from_members(
            self.universe(),
            self.members.iter().copied().filter(|&x| !other.contains(x)),
        )
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.members.iter().all(|&x| other.contains(x))
    }

    pub fn first_common(&self, other: &VertexSet) -> Option<usize> {
        self.members.iter().copied().find(|&x| other.contains(x))
    }
}

/// Validity test for computations on a finite truncation: `(x, R)` is
/// interior-valid iff `B(x, factor·R)` holds no truncation-boundary vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorMargin {
    pub factor: f64,
}

impl Default for InteriorMargin {
    fn default() -> Self {
        InteriorMargin { factor: 9.0 }
    }
}

impl InteriorMargin {
    pub fn new(factor: f64) -> Self {
        InteriorMargin { factor }
    }

    /// Uses a precomputed distance from `x` to the truncation boundary.
    pub fn admits(&self, distance_to_boundary: Option<usize>, radius: f64) -> bool {
        match distance_to_boundary {
            None => true,
            Some(d) => ball_extent(self.factor * radius) <= d,
        }
    }

    pub fn is_valid(&self, g: &WeightedGraph, x: usize, radius: f64) -> bool {
        self.admits(g.distance_to_truncation(x), radius)
    }

    pub fn require(&self, g: &WeightedGraph, x: usize, radius: f64) -> Result<()> {
        if self.is_valid(g, x, radius) {
            Ok(())
        } else {
            Err(Error::NotInterior { x, radius })
        }
    }
}

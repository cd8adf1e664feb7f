//! Deterministic generators for the graph families used in the experiments.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use super::WeightedGraph;
use crate::error::GraphError;

/// Upper bound on generated vertex counts.
pub const MAX_VERTICES: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Path,
    Cycle,
    Box2d,
    Sg,
    Vicsek,
    Star,
    Joined,
}

impl FromStr for Family {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "path" => Family::Path,
            "cycle" => Family::Cycle,
            "box2d" => Family::Box2d,
            "sg" => Family::Sg,
            "vicsek" => Family::Vicsek,
            "star" => Family::Star,
            "joined" => Family::Joined,
            _ => return Err(GraphError::UnknownFamily(s.to_string())),
        })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Family::Path => "path",
            Family::Cycle => "cycle",
            Family::Box2d => "box2d",
            Family::Sg => "sg",
            Family::Vicsek => "vicsek",
            Family::Star => "star",
            Family::Joined => "joined",
        };
        f.write_str(name)
    }
}

/// A generator request.
///
/// `Path(n)` has `n` vertices, `Cycle(n)` has `n` vertices, `Box2d(n)` is the
/// `n × n` grid, `Sg(k)` is the level-`k` Sierpinski gasket skeleton,
/// `Vicsek(k)` the level-`k` Vicsek tree and `Star(k)` a star with `k` leaves.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Path(usize),
    Cycle(usize),
    Box2d(usize),
    Sg(usize),
    Vicsek(usize),
    Star(usize),
    /// Two graphs glued by identifying `left_vertex` with `right_vertex`.
    Joined {
        left: Box<GraphSpec>,
        right: Box<GraphSpec>,
        left_vertex: usize,
        right_vertex: usize,
    },
}

impl GraphSpec {
    pub fn new(family: Family, size: usize) -> Result<Self, GraphError> {
        Ok(match family {
            Family::Path => GraphSpec::Path(size),
            Family::Cycle => GraphSpec::Cycle(size),
            Family::Box2d => GraphSpec::Box2d(size),
            Family::Sg => GraphSpec::Sg(size),
            Family::Vicsek => GraphSpec::Vicsek(size),
            Family::Star => GraphSpec::Star(size),
            Family::Joined => {
                return Err(GraphError::InvalidOption(
                    "joined graphs need two component specs".into(),
                ))
            }
        })
    }

    pub fn family(&self) -> Family {
        match self {
            GraphSpec::Path(_) => Family::Path,
            GraphSpec::Cycle(_) => Family::Cycle,
            GraphSpec::Box2d(_) => Family::Box2d,
            GraphSpec::Sg(_) => Family::Sg,
            GraphSpec::Vicsek(_) => Family::Vicsek,
            GraphSpec::Star(_) => Family::Star,
            GraphSpec::Joined { .. } => Family::Joined,
        }
    }

    /// Vertex count without building the graph.
    pub fn vertex_count(&self) -> Option<usize> {
        let pow = |b: usize, e: usize| b.checked_pow(e as u32);
        match *self {
            GraphSpec::Path(n) | GraphSpec::Cycle(n) => Some(n),
            GraphSpec::Box2d(n) => n.checked_mul(n),
            GraphSpec::Sg(k) => pow(3, k).map(|p| 3 * (p + 1) / 2),
            GraphSpec::Vicsek(k) => pow(5, k.saturating_sub(1)).map(|p| 4 * p + 1),
            GraphSpec::Star(k) => Some(k + 1),
            GraphSpec::Joined { ref left, ref right, .. } => {
                Some(left.vertex_count()? + right.vertex_count()? - 1)
            }
        }
    }

    /// The vertex that plays the role of the origin: path midpoint, grid
    /// center, gasket corner, Vicsek and star center, or the glued vertex.
    pub fn natural_center(&self) -> usize {
        match *self {
            GraphSpec::Path(n) => n / 2,
            GraphSpec::Cycle(_) | GraphSpec::Sg(_) | GraphSpec::Star(_) => 0,
            GraphSpec::Box2d(n) => (n / 2) * n + n / 2,
            GraphSpec::Vicsek(k) => {
                let pts = vicsek_points(k);
                pts.iter().position(|&p| p == (0, 0)).unwrap_or(0)
            }
            GraphSpec::Joined { left_vertex, .. } => left_vertex,
        }
    }
}

impl FromStr for GraphSpec {
    type Err = GraphError;

    /// Parses `family:size`, e.g. `sg:5` or `path:401`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (fam, size) = s
            .split_once(':')
            .ok_or_else(|| GraphError::InvalidOption(format!("expected family:size, got `{s}`")))?;
        let size = size
            .trim()
            .parse()
            .map_err(|_| GraphError::InvalidOption(format!("bad size in `{s}`")))?;
        GraphSpec::new(fam.trim().parse()?, size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerateOptions {
    /// Weight placed on every edge.
    pub weight: f64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions { weight: 1.0 }
    }
}

struct Built {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    boundary: Vec<usize>,
}

/// Builds the requested graph. Output is a pure function of the inputs.
pub fn generate(spec: &GraphSpec, options: &GenerateOptions) -> Result<WeightedGraph, GraphError> {
    if !(options.weight > 0.0) || !options.weight.is_finite() {
        return Err(GraphError::NonPositiveWeight { line: 0, weight: options.weight });
    }
    let built = build(spec)?;
    let w = options.weight;
    WeightedGraph::from_edges(
        built.vertex_count,
        built.edges.into_iter().map(|(u, v)| (u, v, w)),
        built.boundary,
    )
}

fn check_cap(family: &'static str, level: usize, count: Option<usize>) -> Result<(), GraphError> {
    match count {
        Some(c) if c <= MAX_VERTICES => Ok(()),
        _ => Err(GraphError::LevelTooLarge { family, level, cap: MAX_VERTICES }),
    }
}

fn too_small(what: &str, min: usize) -> GraphError {
    GraphError::InvalidOption(format!("{what} needs size at least {min}"))
}

fn build(spec: &GraphSpec) -> Result<Built, GraphError> {
    match *spec {
        GraphSpec::Path(n) => {
            if n < 2 {
                return Err(too_small("path", 2));
            }
            check_cap("path", n, Some(n))?;
            Ok(Built {
                vertex_count: n,
                edges: (0..n - 1).map(|i| (i, i + 1)).collect(),
                boundary: vec![0, n - 1],
            })
        }
        GraphSpec::Cycle(n) => {
            if n < 3 {
                return Err(too_small("cycle", 3));
            }
            check_cap("cycle", n, Some(n))?;
            Ok(Built {
                vertex_count: n,
                edges: (0..n).map(|i| (i, (i + 1) % n)).collect(),
                boundary: vec![],
            })
        }
        GraphSpec::Box2d(n) => {
            if n < 2 {
                return Err(too_small("box2d", 2));
            }
            check_cap("box2d", n, spec.vertex_count())?;
            let id = |i: usize, j: usize| i * n + j;
            let mut edges = Vec::with_capacity(2 * n * (n - 1));
            let mut boundary = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if j + 1 < n {
                        edges.push((id(i, j), id(i, j + 1)));
                    }
                    if i + 1 < n {
                        edges.push((id(i, j), id(i + 1, j)));
                    }
                    if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                        boundary.push(id(i, j));
                    }
                }
            }
            Ok(Built { vertex_count: n * n, edges, boundary })
        }
        GraphSpec::Star(k) => {
            if k < 1 {
                return Err(too_small("star", 1));
            }
            check_cap("star", k, Some(k + 1))?;
            Ok(Built { vertex_count: k + 1, edges: (1..=k).map(|i| (0, i)).collect(), boundary: vec![] })
        }
        GraphSpec::Sg(k) => {
            check_cap("sg", k, spec.vertex_count())?;
            let side = 1i64 << k;
            let mut segs = vec![((0, 0), (1, 0)), ((0, 0), (0, 1)), ((1, 0), (0, 1))];
            for level in 1..=k {
                let s = 1i64 << (level - 1);
                let mut next = Vec::with_capacity(segs.len() * 3);
                for (da, db) in [(0, 0), (s, 0), (0, s)] {
                    next.extend(
                        segs.iter().map(|&((a0, b0), (a1, b1))| ((a0 + da, b0 + db), (a1 + da, b1 + db))),
                    );
                }
                segs = next;
            }
            Ok(lattice_graph(&segs, &[(side, 0), (0, side)]))
        }
        GraphSpec::Vicsek(k) => {
            if k < 1 {
                return Err(too_small("vicsek", 1));
            }
            check_cap("vicsek", k, spec.vertex_count())?;
            let segs = vicsek_segments(k);
            let a = 3i64.pow(k as u32 - 1);
            Ok(lattice_graph(&segs, &[(-a, 0), (a, 0), (0, -a), (0, a)]))
        }
        GraphSpec::Joined { ref left, ref right, left_vertex, right_vertex } => {
            let l = build(left)?;
            let r = build(right)?;
            if left_vertex >= l.vertex_count || right_vertex >= r.vertex_count {
                return Err(GraphError::InvalidOption("glue vertex out of range".into()));
            }
            check_cap("joined", 0, Some(l.vertex_count + r.vertex_count - 1))?;
            // right-hand vertices keep their relative order after the left block
            let relabel = |v: usize| -> usize {
                if v == right_vertex {
                    left_vertex
                } else if v < right_vertex {
                    l.vertex_count + v
                } else {
                    l.vertex_count + v - 1
                }
            };
            let mut edges = l.edges;
            edges.extend(r.edges.iter().map(|&(u, v)| (relabel(u), relabel(v))));
            let mut boundary = l.boundary;
            boundary.extend(r.boundary.iter().map(|&v| relabel(v)));
            boundary.retain(|&v| v != left_vertex);
            Ok(Built { vertex_count: l.vertex_count + r.vertex_count - 1, edges, boundary })
        }
    }
}

type Point = (i64, i64);

/// Numbers lattice points in lexicographic order and emits the segments as edges.
fn lattice_graph(segs: &[(Point, Point)], boundary: &[Point]) -> Built {
    let points: BTreeSet<Point> = segs.iter().flat_map(|&(p, q)| [p, q]).collect();
    let points: Vec<Point> = points.into_iter().collect();
    let index = |p: &Point| points.binary_search(p).expect("segment endpoint");
    Built {
        vertex_count: points.len(),
        edges: segs.iter().map(|(p, q)| (index(p), index(q))).collect(),
        boundary: boundary.iter().map(index).collect(),
    }
}

fn vicsek_segments(k: usize) -> Vec<(Point, Point)> {
    let mut segs: Vec<(Point, Point)> =
        [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().map(|&p| ((0, 0), p)).collect();
    let mut arm = 1i64;
    for _ in 1..k {
        let s = 2 * arm;
        let mut next = Vec::with_capacity(segs.len() * 5);
        for (da, db) in [(0, 0), (s, 0), (-s, 0), (0, s), (0, -s)] {
            next.extend(segs.iter().map(|&((a0, b0), (a1, b1))| ((a0 + da, b0 + db), (a1 + da, b1 + db))));
        }
        segs = next;
        arm *= 3;
    }
    segs
}

fn vicsek_points(k: usize) -> Vec<Point> {
    let pts: BTreeSet<Point> = vicsek_segments(k.max(1)).iter().flat_map(|&(p, q)| [p, q]).collect();
    pts.into_iter().collect()
}

//! Edge-list text format: one `u v w` per line, `#` starts a comment line.
//!
//! The writer adds a `# boundary: ...` comment listing truncation-boundary
//! vertices; the reader honours it and ignores every other comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::WeightedGraph;
use crate::error::{Error, GraphError};

const BOUNDARY_TAG: &str = "boundary:";

/// Parses an edge-list document. Vertex ids are compacted to `0..n` in
/// increasing order of the ids used in the file.
pub fn parse_edge_list(text: &str) -> Result<WeightedGraph, GraphError> {
    let mut raw = Vec::new();
    let mut boundary_raw: Vec<(usize, u64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(list) = comment.trim().strip_prefix(BOUNDARY_TAG) {
                for tok in list.split_whitespace() {
                    let id = tok.parse::<u64>().map_err(|_| GraphError::Parse {
                        line: line_no,
                        message: format!("bad boundary vertex `{tok}`"),
                    })?;
                    boundary_raw.push((line_no, id));
                }
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(GraphError::Parse {
                line: line_no,
                message: format!("expected `u v w`, found {} fields", fields.len()),
            });
        }
        let id = |s: &str| {
            s.parse::<u64>().map_err(|_| GraphError::Parse {
                line: line_no,
                message: format!("bad vertex id `{s}`"),
            })
        };
        let u = id(fields[0])?;
        let v = id(fields[1])?;
        let w: f64 = fields[2].parse().map_err(|_| GraphError::Parse {
            line: line_no,
            message: format!("bad weight `{}`", fields[2]),
        })?;
        if u == v {
            return Err(GraphError::SelfLoop { line: line_no, vertex: u });
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(GraphError::NonPositiveWeight { line: line_no, weight: w });
        }
        raw.push((line_no, u, v, w));
    }
    if raw.is_empty() {
        return Err(GraphError::Empty);
    }

    let mut ids: BTreeMap<u64, usize> = raw.iter().flat_map(|&(_, u, v, _)| [(u, 0), (v, 0)]).collect();
    for (k, slot) in ids.values_mut().enumerate() {
        *slot = k;
    }
    let mut seen = std::collections::HashMap::new();
    for &(line, u, v, _) in &raw {
        let key = (u.min(v), u.max(v));
        if seen.insert(key, line).is_some() {
            return Err(GraphError::DuplicateEdge { line, u: key.0, v: key.1 });
        }
    }
    let mut boundary = Vec::with_capacity(boundary_raw.len());
    for (line, b) in boundary_raw {
        let &id = ids.get(&b).ok_or_else(|| GraphError::Parse {
            line,
            message: format!("boundary vertex {b} has no edges"),
        })?;
        boundary.push(id);
    }
    WeightedGraph::from_edges(
        ids.len(),
        raw.iter().map(|&(_, u, v, w)| (ids[&u], ids[&v], w)),
        boundary,
    )
}

/// Canonical text form: edges sorted by `(u, v)` with `u < v`.
pub fn write_edge_list(g: &WeightedGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {} vertices, {} edges", g.vertex_count(), g.edge_count());
    if !g.truncation_boundary().is_empty() {
        let ids: Vec<String> = g.truncation_boundary().iter().map(|b| b.to_string()).collect();
        let _ = writeln!(out, "# {BOUNDARY_TAG} {}", ids.join(" "));
    }
    for e in g.edges() {
        let _ = writeln!(out, "{} {} {}", e.u, e.v, e.weight);
    }
    out
}

pub fn read_graph_file(path: impl AsRef<Path>) -> Result<WeightedGraph, Error> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_edge_list(&text)?)
}

pub fn write_graph_file(g: &WeightedGraph, path: impl AsRef<Path>) -> Result<(), Error> {
    std::fs::write(path, write_edge_list(g))?;
    Ok(())
}

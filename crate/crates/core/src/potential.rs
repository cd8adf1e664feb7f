//! Discrete potential theory on a weighted graph: harmonic extensions,
//! capacities and resistances, killed Green functions, Harnack constants and
//! the very-strong-recurrence constant.
//!
//! Every problem here is a block of the Laplacian `L = D − W` restricted to the
//! free vertices, so a single factorization is shared by all right-hand sides.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{ball, sphere, InteriorMargin, VertexSet, WeightedGraph};
use crate::linalg::{LaplacianBlock, SolverOptions};
use crate::stopping::hitting_potential;

/// A function on the vertices, harmonic on `domain \ clamped`.
///
/// Vertices outside both `domain` and `clamped` carry the value 0.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub values: Vec<f64>,
    pub clamped: VertexSet,
    pub domain: VertexSet,
    /// `max |Σ_y P(x,y) f(y) − f(x)|` over the free vertices.
    pub residual: f64,
}

impl PotentialField {
    pub fn value(&self, v: usize) -> f64 {
        self.values[v]
    }
}

fn harmonic_residual(g: &WeightedGraph, f: &[f64], free: &[usize]) -> f64 {
    free.iter()
        .map(|&x| {
            let avg: f64 = g.neighbors(x).map(|(y, w)| w * f[y]).sum::<f64>() / g.measure(x);
            (avg - f[x]).abs()
        })
        .fold(0.0, f64::max)
}

/// Harmonic extension of `clamped` data into `domain`.
///
/// Every neighbour of a free vertex must be free or clamped.
pub fn solve_dirichlet(
    g: &WeightedGraph,
    clamped: &[(usize, f64)],
    domain: &VertexSet,
    opts: &SolverOptions,
) -> Result<PotentialField> {
    let n = g.vertex_count();
    let mut values = vec![0.0; n];
    let mut fixed = vec![false; n];
    for &(v, f) in clamped {
        g.check_vertex(v)?;
        values[v] = f;
        fixed[v] = true;
    }
    let clamped_set = VertexSet::from_members(n, clamped.iter().map(|&(v, _)| v));
    let free: Vec<usize> = domain.members().iter().copied().filter(|&v| !fixed[v]).collect();
    if !free.is_empty() {
        let is_free = domain.difference(&clamped_set);
        let mut rhs = vec![0.0; free.len()];
        for (i, &u) in free.iter().enumerate() {
            for (v, w) in g.neighbors(u) {
                if fixed[v] {
                    rhs[i] += w * values[v];
                } else if !is_free.contains(v) {
                    return Err(Error::MissingBoundaryValue(v));
                }
            }
        }
        let block = LaplacianBlock::new(g, &free, opts)?;
        let sol = block.solve(&rhs)?;
        for (i, &u) in free.iter().enumerate() {
            values[u] = sol[i];
        }
    }
    let residual = harmonic_residual(g, &values, &free);
    Ok(PotentialField { values, clamped: clamped_set, domain: domain.clone(), residual })
}

/// Capacity between two disjoint sets, read two ways.
#[derive(Debug, Clone)]
pub struct Capacity {
    /// Dirichlet energy of the equilibrium potential, one term per edge.
    pub capacity: f64,
    pub resistance: f64,
    /// Net current leaving `A`: `Σ_{a∈A} Σ_{v∼a} μ_{av}(f(a) − f(v))`.
    pub flow: f64,
    /// The potential: 1 on `A`, 0 on `B`, harmonic elsewhere.
    pub field: PotentialField,
}

/// `Σ_{unordered edges} μ_{yz} (f(y) − f(z))²`.
pub fn dirichlet_energy(g: &WeightedGraph, f: &[f64]) -> f64 {
    g.edges().iter().map(|e| e.weight * (f[e.u] - f[e.v]).powi(2)).sum()
}

/// `cap(A, B)` and `ρ = 1 / cap`.
pub fn capacity_resistance(g: &WeightedGraph, a: &VertexSet, b: &VertexSet) -> Result<Capacity> {
    if a.is_empty() {
        return Err(Error::EmptySet("A"));
    }
    if b.is_empty() {
        return Err(Error::EmptySet("B"));
    }
    if let Some(v) = a.first_common(b) {
        return Err(Error::Overlap(v));
    }
    let clamped: Vec<(usize, f64)> = a
        .members()
        .iter()
        .map(|&v| (v, 1.0))
        .chain(b.members().iter().map(|&v| (v, 0.0)))
        .collect();
    let field = solve_dirichlet(g, &clamped, &VertexSet::full(g.vertex_count()), &SolverOptions::default())?;
    let f = &field.values;
    let capacity = dirichlet_energy(g, f);
    let flow = a
        .members()
        .iter()
        .map(|&x| g.neighbors(x).map(|(y, w)| w * (f[x] - f[y])).sum::<f64>())
        .sum();
    Ok(Capacity { capacity, resistance: 1.0 / capacity, flow, field })
}

/// `ρ(x, r, R) = ρ(B(x, r), Bᶜ(x, R))`.
pub fn annulus_resistance(g: &WeightedGraph, x: usize, r: f64, big_r: f64) -> Result<f64> {
    g.check_vertex(x)?;
    if !(r < big_r) {
        return Err(Error::InvalidArgument(format!("need r < R, got r = {r}, R = {big_r}")));
    }
    let inner = ball(g, x, r);
    let outer = ball(g, x, big_r).complement();
    Ok(capacity_resistance(g, &inner, &outer)?.resistance)
}

/// One column `g^B(·, z)` of the killed Green function.
#[derive(Debug, Clone)]
pub struct GreenColumn {
    pub region: VertexSet,
    pub pole: usize,
    /// Zero outside the region.
    pub values: Vec<f64>,
}

impl GreenColumn {
    pub fn at(&self, w: usize) -> f64 {
        self.values[w]
    }

    /// `Σ_w g^B(z, w) μ(w)`, which by symmetry is `E_z(T_B)`.
    pub fn weighted_sum(&self, g: &WeightedGraph) -> f64 {
        self.region.members().iter().map(|&w| self.values[w] * g.measure(w)).sum()
    }
}

/// Killed Green functions on a fixed region, one factorization for all poles.
pub struct GreenSolver<'g> {
    graph: &'g WeightedGraph,
    region: VertexSet,
    block: LaplacianBlock,
}

impl<'g> GreenSolver<'g> {
    pub fn new(g: &'g WeightedGraph, region: &VertexSet) -> Result<Self> {
        if region.is_empty() {
            return Err(Error::EmptySet("region"));
        }
        let block = LaplacianBlock::new(g, region.members(), &SolverOptions::default())?;
        Ok(GreenSolver { graph: g, region: region.clone(), block })
    }

    /// `g^B(·, z)`: expected visits to `z` before leaving `B`, over `μ(z)`.
    pub fn column(&self, z: usize) -> Result<GreenColumn> {
        let i = self.block.local_index(z).ok_or(Error::StartOutsideRegion(z))?;
        let mut rhs = vec![0.0; self.block.unknowns().len()];
        rhs[i] = 1.0;
        let sol = self.block.solve(&rhs)?;
        let mut values = vec![0.0; self.graph.vertex_count()];
        for (k, &v) in self.block.unknowns().iter().enumerate() {
            values[v] = sol[k];
        }
        Ok(GreenColumn { region: self.region.clone(), pole: z, values })
    }
}

pub fn green_function(g: &WeightedGraph, region: &VertexSet, z: usize) -> Result<GreenColumn> {
    g.check_vertex(z)?;
    if !region.contains(z) {
        return Err(Error::StartOutsideRegion(z));
    }
    GreenSolver::new(g, region)?.column(z)
}

/// The measure `π = L u` carried by `target`, where
/// `u(w) = P_w(τ_target < T_domain)`; then `u = Σ_z g^domain(·, z) π(z)`.
pub fn capacity_measure(
    g: &WeightedGraph,
    target: &VertexSet,
    domain: &VertexSet,
) -> Result<(Vec<f64>, Vec<(usize, f64)>)> {
    let u = hitting_potential(g, target, domain)?;
    let pi = target
        .members()
        .iter()
        .map(|&z| (z, g.neighbors(z).map(|(v, w)| w * (u[z] - u[v])).sum::<f64>()))
        .filter(|&(_, m)| m.abs() > 1e-15)
        .collect();
    Ok((u, pi))
}

/// Best constant in `max_{B(x,R)} u ≤ H · min_{B(x,R)} u` over nonnegative `u`
/// harmonic on `B(x, 2R)`.
///
/// Such `u` form a cone whose extreme rays are the harmonic measures of single
/// boundary vertices, so it is enough to scan one pole at a time. Returns
/// infinity when some harmonic measure vanishes on `B(x, R)`.
pub fn harnack_constant(g: &WeightedGraph, x: usize, radius: f64) -> Result<f64> {
    harnack_constant_within(g, x, radius, &InteriorMargin::new(2.0))
}

/// As [`harnack_constant`], with the truncation check done against `margin`
/// (factor 0 disables it).
pub fn harnack_constant_within(g: &WeightedGraph, x: usize, radius: f64, margin: &InteriorMargin) -> Result<f64> {
    g.check_vertex(x)?;
    margin.require(g, x, radius)?;
    let inner = ball(g, x, radius);
    if inner.len() == 1 {
        return Ok(1.0);
    }
    let outer = ball(g, x, 2.0 * radius);
    let poles = outer.boundary(g);
    if poles.is_empty() {
        return Err(Error::EmptySet("boundary of B(x, 2R)"));
    }
    let block = LaplacianBlock::new(g, outer.members(), &SolverOptions::default())?;
    let idx: Vec<usize> = inner.members().iter().map(|&y| block.local_index(y).unwrap()).collect();
    let ratios: Vec<f64> = poles
        .members()
        .par_iter()
        .map(|&z| -> Result<f64> {
            let mut rhs = vec![0.0; block.unknowns().len()];
            for (v, w) in g.neighbors(z) {
                if let Some(i) = block.local_index(v) {
                    rhs[i] = w;
                }
            }
            let omega = block.solve(&rhs)?;
            let (lo, hi) = idx
                .iter()
                .map(|&i| omega[i])
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
            Ok(if lo <= 0.0 { f64::INFINITY } else { hi / lo })
        })
        .collect::<Result<_>>()?;
    Ok(ratios.into_iter().fold(1.0, f64::max))
}

/// `min_{w ∈ S(x, r)} P_w(τ_x < T_{x, 2r})`.
pub fn vsr_constant(g: &WeightedGraph, x: usize, r: usize) -> Result<f64> {
    vsr_constant_within(g, x, r, &InteriorMargin::new(2.0))
}

/// As [`vsr_constant`], with the truncation check done against `margin`.
pub fn vsr_constant_within(g: &WeightedGraph, x: usize, r: usize, margin: &InteriorMargin) -> Result<f64> {
    g.check_vertex(x)?;
    if r == 0 {
        return Err(Error::InvalidArgument("r must be positive".into()));
    }
    margin.require(g, x, r as f64)?;
    let s = sphere(g, x, r);
    if s.is_empty() {
        return Err(Error::EmptySet("S(x, r)"));
    }
    let target = VertexSet::from_members(g.vertex_count(), [x]);
    let u = hitting_potential(g, &target, &ball(g, x, 2.0 * r as f64))?;
    Ok(s.members().iter().map(|&w| u[w]).fold(1.0, f64::min))
}

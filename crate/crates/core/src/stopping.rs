//! Exit and hitting times: exact distributions by propagating the killed
//! chain, mean exit times by linear solves, and the inverse scale `e(x, n)`.
//!
//! `T_A = inf{t ≥ 0 : X_t ∉ A}`, so the exit time is zero for a start outside
//! `A`, and `τ_A = T_{Aᶜ}`.

use crate::error::{Error, Result};
use crate::graph::{ball, InteriorMargin, VertexSet, WeightedGraph};
use crate::linalg::{LaplacianBlock, SolverOptions};
use crate::potential::solve_dirichlet;

/// `F[n] = P_{x₀}(T < n)` for `n = 0..=n_max`.
#[derive(Debug, Clone)]
pub struct ExitTimeCdf {
    pub source: usize,
    pub region: VertexSet,
    pub values: Vec<f64>,
}

impl ExitTimeCdf {
    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    /// `P(T < n)`.
    pub fn lt(&self, n: usize) -> f64 {
        self.values[n]
    }

    /// `P(T > n) = 1 − F[n + 1]`.
    pub fn survival(&self, n: usize) -> f64 {
        1.0 - self.values[n + 1]
    }

    /// Mass not yet absorbed by the end of the table, `P(T ≥ n_max)`.
    pub fn tail_mass(&self) -> f64 {
        1.0 - self.values[self.n_max()]
    }
}

/// The walk restricted to a finite region, with mass leaving it discarded.
struct KilledChain {
    rows: Vec<Vec<(usize, f64)>>,
    /// One-step probability of leaving the region from each member.
    leak: Vec<f64>,
    start: usize,
}

impl KilledChain {
    fn new(g: &WeightedGraph, x0: usize, region: &VertexSet) -> Result<Self> {
        g.check_vertex(x0)?;
        if !region.contains(x0) {
            return Err(Error::StartOutsideRegion(x0));
        }
        let members = region.members();
        let local = |v: usize| members.binary_search(&v).ok();
        let rows = members
            .iter()
            .map(|&v| {
                g.neighbors(v)
                    .filter_map(|(w, mu)| local(w).map(|j| (j, mu / g.measure(v))))
                    .collect()
            })
            .collect();
        let leak = members
            .iter()
            .map(|&v| g.neighbors(v).filter(|&(w, _)| local(w).is_none()).map(|(_, mu)| mu).sum::<f64>() / g.measure(v))
            .collect();
        Ok(KilledChain { rows, leak, start: local(x0).unwrap() })
    }

    /// Calls `visit(t, alive, exited)` for `t = 0, 1, …` until it returns
    /// false. `exited` accumulates the leaked mass step by step, so it is
    /// nondecreasing and exactly zero while nothing can leave.
    fn run(&self, mut visit: impl FnMut(usize, f64, f64) -> bool) {
        let n = self.rows.len();
        let mut mass = vec![0.0; n];
        let mut next = vec![0.0; n];
        mass[self.start] = 1.0;
        let mut exited = 0.0;
        let mut t = 0;
        loop {
            let alive: f64 = mass.iter().sum();
            if !visit(t, alive, exited) {
                return;
            }
            next.iter_mut().for_each(|v| *v = 0.0);
            for (i, row) in self.rows.iter().enumerate() {
                let m = mass[i];
                if m != 0.0 {
                    exited += m * self.leak[i];
                    for &(j, p) in row {
                        next[j] += m * p;
                    }
                }
            }
            std::mem::swap(&mut mass, &mut next);
            t += 1;
        }
    }
}

/// Exact law of the exit time from `region` started at `x0`.
pub fn exit_time_cdf(
    g: &WeightedGraph,
    x0: usize,
    region: &VertexSet,
    n_max: usize,
) -> Result<ExitTimeCdf> {
    let chain = KilledChain::new(g, x0, region)?;
    let mut values = vec![0.0; n_max + 1];
    chain.run(|t, _, exited| {
        if t < n_max {
            values[t + 1] = exited.min(1.0);
        }
        t + 1 < n_max
    });
    Ok(ExitTimeCdf { source: x0, region: region.clone(), values })
}

/// Exact law of the hitting time `τ_target` started at `x0`.
pub fn hitting_time_cdf(
    g: &WeightedGraph,
    x0: usize,
    target: &VertexSet,
    n_max: usize,
) -> Result<ExitTimeCdf> {
    g.check_vertex(x0)?;
    if target.is_empty() {
        return Err(Error::EmptySet("target"));
    }
    if target.contains(x0) {
        let mut values = vec![1.0; n_max + 1];
        values[0] = 0.0;
        return Ok(ExitTimeCdf { source: x0, region: target.complement(), values });
    }
    exit_time_cdf(g, x0, &target.complement(), n_max)
}

/// `Σ_{n ≥ 0} P(T > n)`, run until the surviving mass drops below `tol`.
/// Returns the sum and the surviving mass at the cut.
pub fn survival_sum(
    g: &WeightedGraph,
    x0: usize,
    region: &VertexSet,
    tol: f64,
    max_steps: usize,
) -> Result<(f64, f64)> {
    let chain = KilledChain::new(g, x0, region)?;
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut last = 1.0;
    chain.run(|t, alive, _| {
        // Kahan summation; the series runs for tens of thousands of terms
        let y = alive - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
        last = alive;
        alive > tol && t < max_steps
    });
    Ok((sum, last))
}

/// `P_w(τ_target < T_domain)`: harmonic on `domain \ target`, one on
/// `target`, zero outside `domain`.
pub fn hitting_before_exit(
    g: &WeightedGraph,
    w: usize,
    target: &VertexSet,
    domain: &VertexSet,
) -> Result<f64> {
    g.check_vertex(w)?;
    if target.is_empty() {
        return Err(Error::EmptySet("target"));
    }
    if target.contains(w) {
        return Ok(1.0);
    }
    if !domain.contains(w) {
        return Ok(0.0);
    }
    Ok(hitting_potential(g, target, domain)?[w])
}

/// The whole field `w ↦ P_w(τ_target < T_domain)` over all vertices.
pub fn hitting_potential(
    g: &WeightedGraph,
    target: &VertexSet,
    domain: &VertexSet,
) -> Result<Vec<f64>> {
    if target.is_empty() {
        return Err(Error::EmptySet("target"));
    }
    let free = domain.difference(target);
    let boundary = free.boundary(g);
    let clamped: Vec<(usize, f64)> = boundary
        .members()
        .iter()
        .map(|&v| (v, if target.contains(v) { 1.0 } else { 0.0 }))
        .collect();
    let field = solve_dirichlet(g, &clamped, &free, &SolverOptions::default())?;
    let mut out = vec![0.0; g.vertex_count()];
    for &v in target.members() {
        out[v] = 1.0;
    }
    for &v in free.members() {
        out[v] = field.values[v];
    }
    Ok(out)
}

/// `E_y(A)` for every vertex `y` (zero outside `A`).
pub fn mean_exit_times(g: &WeightedGraph, region: &VertexSet, opts: &SolverOptions) -> Result<Vec<f64>> {
    if region.is_empty() {
        return Err(Error::EmptySet("region"));
    }
    let block = LaplacianBlock::new(g, region.members(), opts)?;
    let rhs: Vec<f64> = block.unknowns().iter().map(|&v| g.measure(v)).collect();
    let sol = block.solve(&rhs)?;
    let mut out = vec![0.0; g.vertex_count()];
    for (i, &v) in block.unknowns().iter().enumerate() {
        out[v] = sol[i];
    }
    Ok(out)
}

/// `E(x, R) = E_x(B(x, R))`.
pub fn mean_exit_time(g: &WeightedGraph, x: usize, radius: f64) -> Result<f64> {
    g.check_vertex(x)?;
    Ok(mean_exit_times(g, &ball(g, x, radius), &SolverOptions::default())?[x])
}

/// Relative tolerance used when inverting `R ↦ E(x, R)`.
pub const INVERSE_SLACK: f64 = 1e-9;

/// `R ↦ E(x, R)` and `Ē(x, R)` for `R = 1..=R_max`.
#[derive(Debug, Clone)]
pub struct ScaleProfile {
    pub center: usize,
    /// `mean[R - 1] = E(x, R)`.
    pub mean: Vec<f64>,
    /// `max_mean[R - 1] = Ē(x, R)`.
    pub max_mean: Vec<f64>,
    /// Whether radius `R` passed the interior-margin test.
    pub interior: Vec<bool>,
}

impl ScaleProfile {
    pub fn r_max(&self) -> usize {
        self.mean.len()
    }

    /// `E(x, R)` for integer `R ≥ 1`.
    pub fn at(&self, r: usize) -> f64 {
        self.mean[r - 1]
    }

    /// Largest `Ē(x, R) / E(x, R)` over the profile.
    pub fn ebar_constant(&self) -> f64 {
        self.mean.iter().zip(&self.max_mean).map(|(e, m)| m / e).fold(0.0, f64::max)
    }

    /// `e(x, n) = min{r : E(x, r) ≥ n}`, comparing with a relative slack of
    /// `INVERSE_SLACK` so that solver rounding of exact integers is ignored.
    pub fn inverse(&self, n: f64) -> Result<usize> {
        match self.mean.iter().position(|&e| e >= n * (1.0 - INVERSE_SLACK)) {
            Some(i) => Ok(i + 1),
            None => Err(Error::OutOfRange {
                requested: n,
                available: self.mean.last().copied().unwrap_or(0.0),
            }),
        }
    }
}

/// Mean exit times from `B(x, R)` for `R = 1..=r_max`, one solve per radius.
pub fn mean_exit_profile(
    g: &WeightedGraph,
    x: usize,
    r_max: usize,
    margin: &InteriorMargin,
) -> Result<ScaleProfile> {
    g.check_vertex(x)?;
    let to_boundary = g.distance_to_truncation(x);
    let opts = SolverOptions::default();
    let mut mean = Vec::with_capacity(r_max);
    let mut max_mean = Vec::with_capacity(r_max);
    let mut interior = Vec::with_capacity(r_max);
    for r in 1..=r_max {
        let b = ball(g, x, r as f64);
        let times = mean_exit_times(g, &b, &opts)?;
        mean.push(times[x]);
        max_mean.push(b.members().iter().map(|&y| times[y]).fold(0.0, f64::max));
        interior.push(margin.admits(to_boundary, r as f64));
    }
    Ok(ScaleProfile { center: x, mean, max_mean, interior })
}

/// `e(x, n)` read off a profile.
pub fn inverse_scale(profile: &ScaleProfile, n: f64) -> Result<usize> {
    profile.inverse(n)
}

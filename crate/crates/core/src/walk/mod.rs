//! n-step transition kernels by repeated sparse propagation, and a seeded
//! Monte Carlo walker used as an independent check.

mod simulate;

pub use simulate::{
    first_passage_counts, simulate_walk, PassageCounts, RngState, StopRule, Trajectory, WalkSampler,
};

use crate::error::{Error, Result};
use crate::graph::{VertexSet, WeightedGraph};

/// Distribution of `X_t`, optionally killed on leaving `region`.
#[derive(Debug, Clone)]
pub struct ProbabilityVector {
    mass: Vec<f64>,
    scratch: Vec<f64>,
    time: usize,
    region: Option<VertexSet>,
}

impl ProbabilityVector {
    pub fn point_mass(g: &WeightedGraph, x: usize) -> Result<Self> {
        g.check_vertex(x)?;
        let mut mass = vec![0.0; g.vertex_count()];
        mass[x] = 1.0;
        Ok(ProbabilityVector { scratch: vec![0.0; mass.len()], mass, time: 0, region: None })
    }

    /// Point mass at `x` for the walk absorbed as soon as it leaves `region`.
    pub fn killed(g: &WeightedGraph, x: usize, region: VertexSet) -> Result<Self> {
        let mut pv = Self::point_mass(g, x)?;
        if !region.contains(x) {
            return Err(Error::StartOutsideRegion(x));
        }
        pv.region = Some(region);
        Ok(pv)
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// One application of the transition kernel.
    pub fn step(&mut self, g: &WeightedGraph) {
        self.scratch.iter_mut().for_each(|v| *v = 0.0);
        match &self.region {
            None => {
                for x in 0..self.mass.len() {
                    spread(g, x, self.mass[x], &mut self.scratch);
                }
            }
            Some(region) => {
                for &x in region.members() {
                    spread(g, x, self.mass[x], &mut self.scratch);
                }
                for (y, v) in self.scratch.iter_mut().enumerate() {
                    if !region.contains(y) {
                        *v = 0.0;
                    }
                }
            }
        }
        std::mem::swap(&mut self.mass, &mut self.scratch);
        self.time += 1;
    }
}

#[inline]
fn spread(g: &WeightedGraph, x: usize, m: f64, out: &mut [f64]) {
    if m == 0.0 {
        return;
    }
    let scale = m / g.measure(x);
    for (y, w) in g.neighbors(x) {
        out[y] += scale * w;
    }
}

/// `P_t(x, y)` for every listed target and `t = 0..=n_max`; row `t` holds
/// the targets in the given order.
pub fn transition_series(
    g: &WeightedGraph,
    x: usize,
    targets: &[usize],
    n_max: usize,
) -> Result<Vec<Vec<f64>>> {
    for &y in targets {
        g.check_vertex(y)?;
    }
    let mut pv = ProbabilityVector::point_mass(g, x)?;
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(targets.iter().map(|&y| pv.mass[y]).collect());
    for _ in 0..n_max {
        pv.step(g);
        out.push(targets.iter().map(|&y| pv.mass[y]).collect());
    }
    Ok(out)
}

/// Heat kernel `p_t(x, y) = P_t(x, y) / μ(y)` for `t = 0..=n_max`.
pub fn heat_kernel_series(g: &WeightedGraph, x: usize, y: usize, n_max: usize) -> Result<Vec<f64>> {
    let mu = g.measure_checked(y)?;
    Ok(transition_series(g, x, &[y], n_max)?.into_iter().map(|row| row[0] / mu).collect())
}

/// `p_n(x, y)`.
pub fn heat_kernel(g: &WeightedGraph, n: usize, x: usize, y: usize) -> Result<f64> {
    Ok(heat_kernel_series(g, x, y, n)?[n])
}

/// `p̃_n(x, y) = p_n(x, y) + p_{n+1}(x, y)`.
pub fn smoothed_heat_kernel(g: &WeightedGraph, n: usize, x: usize, y: usize) -> Result<f64> {
    let s = heat_kernel_series(g, x, y, n + 1)?;
    Ok(s[n] + s[n + 1])
}

impl WeightedGraph {
    pub(crate) fn measure_checked(&self, x: usize) -> Result<f64> {
        self.check_vertex(x)?;
        Ok(self.measure(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GenerateOptions, GraphSpec};

    fn gen(spec: GraphSpec) -> WeightedGraph {
        generate(&spec, &GenerateOptions::default()).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let p = gen(GraphSpec::Path(21));
        assert_eq!(heat_kernel(&p, 0, 10, 10).unwrap(), 0.5);
        assert_eq!(heat_kernel(&p, 1, 10, 11).unwrap(), 0.25);
        let c = gen(GraphSpec::Cycle(4));
        // two-step walks from 0: back to 0 with probability 1/2
        assert!((heat_kernel(&c, 2, 0, 0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn parity_on_path() {
        let p = gen(GraphSpec::Path(41));
        let s = heat_kernel_series(&p, 20, 20, 30).unwrap();
        for n in 0..30 {
            if n % 2 == 1 {
                assert_eq!(s[n], 0.0);
            }
            assert!(s[n] + s[n + 1] > 0.0);
        }
    }

    #[test]
    fn mass_conserved_without_kill() {
        let g = gen(GraphSpec::Sg(3));
        let mut pv = ProbabilityVector::point_mass(&g, 0).unwrap();
        for n in 1..=200 {
            pv.step(&g);
            assert!((pv.total() - 1.0).abs() <= n as f64 * 1e-12);
        }
    }

    #[test]
    fn killed_mass_is_nonincreasing() {
        let g = gen(GraphSpec::Sg(3));
        let region = crate::graph::ball(&g, 0, 4.0);
        let mut pv = ProbabilityVector::killed(&g, 0, region).unwrap();
        let mut last = 1.0;
        for _ in 0..100 {
            pv.step(&g);
            assert!(pv.total() <= last + 1e-15);
            assert!(pv.mass().iter().all(|&m| m >= 0.0));
            last = pv.total();
        }
        assert!(ProbabilityVector::killed(&g, 9, crate::graph::ball(&g, 0, 1.0)).is_err());
    }
}

//! Scale functions built from mean exit times: `k(x,n,R)`, `l_C(x,y,n,R)`,
//! `ν(x,n,R)`, power-law exponent fits, and the time-comparison constants.

use std::collections::HashMap;
use std::sync::RwLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ball, ball_extent, shortest_path_union, sphere, WeightedGraph};
use crate::stopping::{mean_exit_times, ScaleProfile};
use crate::linalg::SolverOptions;

/// Constants of the scale definitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub q: f64,
    #[serde(rename = "Q")]
    pub big_q: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl Default for ScaleParams {
    fn default() -> Self {
        ScaleParams { q: 0.25, big_q: 1.0, c: 9.0 }
    }
}

impl ScaleParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("q", self.q), ("Q", self.big_q), ("C", self.c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Memo of `E(z, r)` keyed by `(z, ⌈r⌉)`, shared between threads.
///
/// A ball covering the whole finite graph has no exit; its value is `+∞`.
pub struct MeanExitCache<'g> {
    graph: &'g WeightedGraph,
    memo: RwLock<HashMap<(usize, usize), f64>>,
}

impl<'g> MeanExitCache<'g> {
    pub fn new(graph: &'g WeightedGraph) -> Self {
        MeanExitCache { graph, memo: RwLock::new(HashMap::new()) }
    }

    pub fn graph(&self) -> &'g WeightedGraph {
        self.graph
    }

    pub fn len(&self) -> usize {
        self.memo.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `E(z, radius)`.
    pub fn get(&self, z: usize, radius: f64) -> Result<f64> {
        self.graph.check_vertex(z)?;
        let extent = ball_extent(radius);
        if extent == 0 {
            return Ok(0.0);
        }
        if let Some(&v) = self.memo.read().unwrap().get(&(z, extent)) {
            return Ok(v);
        }
        let b = ball(self.graph, z, extent as f64);
        let value = if b.len() == self.graph.vertex_count() {
            f64::INFINITY
        } else {
            mean_exit_times(self.graph, &b, &SolverOptions::default())?[z]
        };
        self.memo.write().unwrap().insert((z, extent), value);
        Ok(value)
    }

    fn min_over(&self, zs: &[usize], radius: f64) -> Result<f64> {
        zs.par_iter()
            .map(|&z| self.get(z, radius))
            .try_reduce(|| f64::INFINITY, |a, b| Ok(a.min(b)))
    }

    fn max_over(&self, zs: &[usize], radius: f64) -> Result<f64> {
        zs.par_iter()
            .map(|&z| self.get(z, radius))
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
    }
}

/// `k(x, n, R)`: the largest `k ≤ R` with `n/k ≤ q·min_{z∈B(x,R)} E(z, R/k)`,
/// or 1 if there is none.
///
/// The search stops at `R` because for `k > R` every ball `B(z, R/k)` is the
/// single vertex `z` and the inequality becomes `n/k ≤ q`, which holds for all
/// large `k`.
pub fn k_scale(cache: &MeanExitCache, x: usize, n: f64, r: usize, params: &ScaleParams) -> Result<usize> {
    params.validate()?;
    let g = cache.graph();
    g.check_vertex(x)?;
    if r == 0 {
        return Err(Error::InvalidArgument("R must be positive".into()));
    }
    let zs = ball(g, x, r as f64);
    for k in (1..=r).rev() {
        if k_holds(cache, zs.members(), n, r, k, params)? {
            return Ok(k);
        }
    }
    Ok(1)
}

/// Whether `k` satisfies the defining inequality of `k(x, n, R)`.
pub fn k_holds(
    cache: &MeanExitCache,
    zs: &[usize],
    n: f64,
    r: usize,
    k: usize,
    params: &ScaleParams,
) -> Result<bool> {
    let e = cache.min_over(zs, r as f64 / k as f64)?;
    Ok(n / k as f64 <= params.q * e)
}

/// `l_C(x, y, n, R)`: the smallest `l ≥ 1` with
/// `n/l ≥ Q·max_{z∈π_{x,y}} E(z, C·R/l)`, or `R` if there is none.
///
/// For `l > C·R` every ball is a single vertex, so the search up to
/// `⌊C·R⌋ + 1` is exhaustive. The result may exceed `R`; it is not capped.
pub fn l_scale(
    cache: &MeanExitCache,
    x: usize,
    y: usize,
    n: f64,
    r: usize,
    params: &ScaleParams,
) -> Result<usize> {
    params.validate()?;
    let g = cache.graph();
    g.check_vertex(x)?;
    g.check_vertex(y)?;
    if x == y {
        return Ok(1);
    }
    let path = shortest_path_union(g, x, y)?;
    let last = (params.c * r as f64).floor() as usize + 1;
    for l in 1..=last {
        if l_holds(cache, path.members(), n, r, l, params)? {
            return Ok(l);
        }
    }
    Ok(r)
}

/// Whether `l` satisfies the defining inequality of `l_C(x, y, n, R)`.
pub fn l_holds(
    cache: &MeanExitCache,
    path: &[usize],
    n: f64,
    r: usize,
    l: usize,
    params: &ScaleParams,
) -> Result<bool> {
    let e = cache.max_over(path, params.c * r as f64 / l as f64)?;
    Ok(n / l as f64 >= params.big_q * e)
}

/// `ν(x, n, R) = min_{y ∈ S(x, 2R)} l_9(x, y, n, R)`.
pub fn nu_scale(cache: &MeanExitCache, x: usize, n: f64, r: usize, params: &ScaleParams) -> Result<usize> {
    let g = cache.graph();
    g.check_vertex(x)?;
    let s = sphere(g, x, 2 * r);
    if s.is_empty() {
        return Err(Error::EmptySet("S(x, 2R)"));
    }
    let p9 = ScaleParams { c: 9.0, ..*params };
    s.members()
        .par_iter()
        .map(|&y| l_scale(cache, x, y, n, r, &p9))
        .try_reduce(|| usize::MAX, |a, b| Ok(a.min(b)))
}

/// A power law fitted on a log-log scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    /// `log E ≈ intercept + exponent·log R`.
    pub intercept: f64,
    /// `max |E_fit / E − 1|` over the radii used.
    pub max_rel_residual: f64,
    pub r_range: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFits {
    /// Least-squares slope over the dyadic radii `R ≥ √R_max`.
    pub beta: ExponentFit,
    /// Smallest slope between consecutive dyadic radii.
    pub beta_prime: ExponentFit,
    /// Smallest `c` with `E(R₂)/E(R₁) ≥ c·(R₂/R₁)^β′` over all profile pairs.
    pub lower_constant: f64,
    /// Largest `C` with `E(R₂)/E(R₁) ≤ C·(R₂/R₁)^β` over all profile pairs.
    pub upper_constant: f64,
}

/// Fits `E(x, R) ≈ R^β` on a mean-exit profile.
pub fn fit_exponents(profile: &ScaleProfile) -> Result<ExponentFits> {
    const NEED: usize = 8;
    if profile.r_max() < NEED {
        return Err(Error::ProfileTooShort { len: profile.r_max(), need: NEED });
    }
    let radii: Vec<usize> = std::iter::successors(Some(1usize), |r| Some(r * 2))
        .take_while(|&r| r <= profile.r_max())
        .collect();
    let pts: Vec<(f64, f64)> = radii.iter().map(|&r| ((r as f64).ln(), profile.at(r).ln())).collect();
    // β uses the top half of the log range; small balls carry lattice effects
    let first = radii.iter().position(|&r| r * r >= profile.r_max()).unwrap();
    let top = &pts[first..];
    let m = top.len() as f64;
    let mx = top.iter().map(|p| p.0).sum::<f64>() / m;
    let my = top.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = top.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = top.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = |b: f64, a: f64, range: &[(f64, f64)]| {
        range.iter().map(|p| ((a + b * p.0).exp() / p.1.exp() - 1.0).abs()).fold(0.0, f64::max)
    };
    let beta = ExponentFit {
        exponent: slope,
        intercept,
        max_rel_residual: residual(slope, intercept, top),
        r_range: (radii[first], *radii.last().unwrap()),
    };
    let (i, local) = pts
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, s)| if s < best.1 { (i, s) } else { best });
    let pair = &pts[i..i + 2];
    let a = pair[0].1 - local * pair[0].0;
    let beta_prime = ExponentFit {
        exponent: local,
        intercept: a,
        max_rel_residual: residual(local, a, pair),
        r_range: (radii[i], radii[i + 1]),
    };
    let mut lower = f64::INFINITY;
    let mut upper: f64 = 0.0;
    for r1 in 1..=profile.r_max() {
        for r2 in r1..=profile.r_max() {
            let ratio = profile.at(r2) / profile.at(r1);
            let scale = r2 as f64 / r1 as f64;
            lower = lower.min(ratio / scale.powf(local));
            upper = upper.max(ratio / scale.powf(slope));
        }
    }
    Ok(ExponentFits { beta, beta_prime, lower_constant: lower, upper_constant: upper })
}

/// Time-comparison constants measured on a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonConstants {
    /// `max E(y, 2R) / E(x, R)` over sampled `y ∈ B(x, R)`.
    pub c_t: f64,
    /// Least integer `a` with `E(x, aR) ≥ 2E(x, R)` on every sample.
    pub a_t: usize,
    /// `max Ē(x, R) / E(x, R)`.
    pub ebar: f64,
}

/// Computes `C_T`, `A_T` and the `Ē` constant over sampled `(x, y, R)`.
pub fn comparison_constants(
    cache: &MeanExitCache,
    samples: &[(usize, usize, usize)],
) -> Result<ComparisonConstants> {
    const A_CAP: usize = 64;
    if samples.is_empty() {
        return Err(Error::EmptySet("sample"));
    }
    let g = cache.graph();
    let mut c_t: f64 = 0.0;
    let mut ebar: f64 = 0.0;
    let mut a_t = 1;
    for &(x, y, r) in samples {
        let b = ball(g, x, r as f64);
        if !b.contains(y) {
            return Err(Error::InvalidArgument(format!("y = {y} is not in B({x}, {r})")));
        }
        let e = cache.get(x, r as f64)?;
        c_t = c_t.max(cache.get(y, 2.0 * r as f64)? / e);
        let times = mean_exit_times(g, &b, &SolverOptions::default())?;
        let top = b.members().iter().map(|&v| times[v]).fold(0.0, f64::max);
        ebar = ebar.max(top / e);
        let mut a = 1;
        while cache.get(x, (a * r) as f64)? < 2.0 * e {
            a += 1;
            if a > A_CAP {
                return Err(Error::OutOfRange { requested: 2.0 * e, available: cache.get(x, (A_CAP * r) as f64)? });
            }
        }
        a_t = a_t.max(a);
    }
    Ok(ComparisonConstants { c_t, a_t, ebar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GenerateOptions, GraphSpec, InteriorMargin};
    use crate::stopping::mean_exit_profile;

    fn path(n: usize) -> WeightedGraph {
        generate(&GraphSpec::Path(n), &GenerateOptions::default()).unwrap()
    }

    #[test]
    fn k_example_and_fallback() {
        let g = path(201);
        let cache = MeanExitCache::new(&g);
        let p = ScaleParams::default();
        assert_eq!(k_scale(&cache, 100, 4.0, 8, &p).unwrap(), 7);
        assert_eq!(k_scale(&cache, 100, 1e6, 8, &p).unwrap(), 1);
        let mut prev = usize::MAX;
        for n in 8..200 {
            let k = k_scale(&cache, 100, n as f64, 8, &p).unwrap();
            assert!(k <= prev);
            prev = k;
        }
    }

    #[test]
    fn l_example_and_fallback() {
        let g = path(401);
        let cache = MeanExitCache::new(&g);
        let p = ScaleParams { q: 0.25, big_q: 1.0, c: 9.0 };
        assert_eq!(l_scale(&cache, 200, 204, 400.0, 4, &p).unwrap(), 4);
        assert_eq!(l_scale(&cache, 200, 200, 400.0, 4, &p).unwrap(), 1);
        // n/l ≥ Q·1 is impossible for n = 0
        assert_eq!(l_scale(&cache, 200, 204, 0.0, 4, &p).unwrap(), 4);
        let mut prev = usize::MAX;
        for n in (50..3000).step_by(50) {
            let l = l_scale(&cache, 200, 204, n as f64, 4, &p).unwrap();
            assert!(l <= prev, "n={n}");
            prev = l;
        }
    }

    #[test]
    fn nu_is_symmetric_on_path() {
        let g = path(401);
        let cache = MeanExitCache::new(&g);
        let p = ScaleParams::default();
        let nu = nu_scale(&cache, 200, 500.0, 3, &p).unwrap();
        let left = l_scale(&cache, 200, 194, 500.0, 3, &p).unwrap();
        let right = l_scale(&cache, 200, 206, 500.0, 3, &p).unwrap();
        assert_eq!(left, right);
        assert_eq!(nu, left);
        let short = path(5);
        let cache = MeanExitCache::new(&short);
        assert!(nu_scale(&cache, 2, 10.0, 3, &p).is_err());
    }

    #[test]
    fn whole_graph_ball_has_infinite_exit_time() {
        let g = path(5);
        let cache = MeanExitCache::new(&g);
        assert_eq!(cache.get(2, 3.0).unwrap(), f64::INFINITY);
        assert!((cache.get(2, 2.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((cache.get(2, 1.5).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn path_exponent_is_two() {
        let g = path(301);
        let prof = mean_exit_profile(&g, 150, 64, &InteriorMargin::new(1.0)).unwrap();
        let fit = fit_exponents(&prof).unwrap();
        assert!((fit.beta.exponent - 2.0).abs() < 1e-9);
        assert!(fit.beta.exponent >= fit.beta_prime.exponent - 1e-12);
        assert!((fit.upper_constant - 1.0).abs() < 1e-6);
        let short = mean_exit_profile(&g, 150, 4, &InteriorMargin::new(1.0)).unwrap();
        assert!(matches!(fit_exponents(&short), Err(Error::ProfileTooShort { .. })));
    }

    #[test]
    fn path_comparison_constants() {
        let g = path(201);
        let cache = MeanExitCache::new(&g);
        let samples: Vec<(usize, usize, usize)> =
            [(100, 100, 3), (100, 102, 3), (100, 95, 8), (90, 91, 5)].to_vec();
        let c = comparison_constants(&cache, &samples).unwrap();
        assert!((c.c_t - 4.0).abs() < 1e-9);
        assert_eq!(c.a_t, 2);
        assert!((c.ebar - 1.0).abs() < 1e-9);
    }
}

//! Seeded Monte Carlo walks.
//!
//! The generator is ChaCha8 (counter-based): `RngState { seed, stream }` maps
//! to `ChaCha8Rng::seed_from_u64(seed)` on stream `stream`. Parallel batches use
//! one stream per fixed-size chunk, so results do not depend on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{VertexSet, WeightedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState { seed, stream: 0 }
    }

    pub fn split(&self, worker: u64) -> Self {
        RngState { seed: self.seed, stream: worker }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// When a simulated walk stops.
#[derive(Debug, Clone)]
pub enum StopRule {
    /// Run to the horizon.
    Horizon,
    /// Stop at the first `t ≥ 0` with `X_t ∉ set`.
    ExitSet(VertexSet),
    /// Stop at the first `t ≥ 0` with `X_t ∈ set`.
    HitSet(VertexSet),
}

impl StopRule {
    fn stops_at(&self, v: usize) -> bool {
        match self {
            StopRule::Horizon => false,
            StopRule::ExitSet(s) => !s.contains(v),
            StopRule::HitSet(s) => s.contains(v),
        }
    }
}

/// Cumulative transition rows for inverse-CDF sampling.
#[derive(Debug, Clone)]
pub struct WalkSampler {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    cumulative: Vec<f64>,
}

impl WalkSampler {
    pub fn new(g: &WeightedGraph) -> Self {
        let mut offsets = vec![0];
        let mut targets = Vec::with_capacity(2 * g.edge_count());
        let mut cumulative = Vec::with_capacity(2 * g.edge_count());
        for x in 0..g.vertex_count() {
            let mut acc = 0.0;
            for (y, w) in g.neighbors(x) {
                acc += w / g.measure(x);
                targets.push(y);
                cumulative.push(acc);
            }
            offsets.push(targets.len());
        }
        WalkSampler { offsets, targets, cumulative }
    }

    #[inline]
    pub fn step<R: Rng>(&self, x: usize, rng: &mut R) -> usize {
        let r = self.offsets[x]..self.offsets[x + 1];
        let cum = &self.cumulative[r.clone()];
        let u: f64 = rng.random::<f64>() * cum[cum.len() - 1];
        let k = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        self.targets[r.start + k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `X_0, X_1, …` up to the stopping time or horizon.
    pub path: Vec<usize>,
    /// Stopping time, `None` if the horizon came first.
    pub stopped_at: Option<usize>,
}

/// Samples one trajectory of at most `horizon` steps.
pub fn simulate_walk<R: Rng>(
    g: &WeightedGraph,
    x: usize,
    horizon: usize,
    rng: &mut R,
    stop: &StopRule,
) -> Result<Trajectory> {
    g.check_vertex(x)?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let sampler = WalkSampler::new(g);
    let mut path = vec![x];
    let mut v = x;
    if stop.stops_at(v) {
        return Ok(Trajectory { path, stopped_at: Some(0) });
    }
    for t in 1..=horizon {
        v = sampler.step(v, rng);
        path.push(v);
        if stop.stops_at(v) {
            return Ok(Trajectory { path, stopped_at: Some(t) });
        }
    }
    Ok(Trajectory { path, stopped_at: None })
}

/// Histogram of stopping times over many independent walks.
#[derive(Debug, Clone, PartialEq)]
pub struct PassageCounts {
    /// `counts[t]` walks stopped exactly at time `t`, `t = 0..=horizon`.
    pub counts: Vec<u64>,
    /// Walks still running at the horizon.
    pub censored: u64,
    pub walks: u64,
}

impl PassageCounts {
    /// Empirical `P(stop < n)` for `n = 0..=horizon + 1`.
    pub fn empirical_cdf(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.counts.len() + 1);
        let mut acc = 0u64;
        out.push(0.0);
        for &c in &self.counts {
            acc += c;
            out.push(acc as f64 / self.walks as f64);
        }
        out
    }
}

const CHUNK: u64 = 4096;

/// Runs `walks` walks from `x` and tallies stopping times. Deterministic in
/// `(seed, walks)`.
pub fn first_passage_counts(
    g: &WeightedGraph,
    x: usize,
    walks: u64,
    horizon: usize,
    seed: RngState,
    stop: &StopRule,
) -> Result<PassageCounts> {
    g.check_vertex(x)?;
    let sampler = WalkSampler::new(g);
    let chunks = walks.div_ceil(CHUNK);
    let partial: Vec<(Vec<u64>, u64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed.split(seed.stream.wrapping_add(c)).rng();
            let n = CHUNK.min(walks - c * CHUNK);
            let mut counts = vec![0u64; horizon + 1];
            let mut censored = 0;
            for _ in 0..n {
                let mut v = x;
                let mut stopped = None;
                if stop.stops_at(v) {
                    stopped = Some(0);
                } else {
                    for t in 1..=horizon {
                        v = sampler.step(v, &mut rng);
                        if stop.stops_at(v) {
                            stopped = Some(t);
                            break;
                        }
                    }
                }
                match stopped {
                    Some(t) => counts[t] += 1,
                    None => censored += 1,
                }
            }
            (counts, censored)
        })
        .collect();
    let mut counts = vec![0u64; horizon + 1];
    let mut censored = 0;
    for (c, k) in partial {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
        censored += k;
    }
    Ok(PassageCounts { counts, censored, walks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ball, generate, GenerateOptions, GraphSpec};

    #[test]
    fn same_seed_same_trajectory() {
        let g = generate(&GraphSpec::Sg(3), &GenerateOptions::default()).unwrap();
        let a = simulate_walk(&g, 0, 500, &mut RngState::new(7).rng(), &StopRule::Horizon).unwrap();
        let b = simulate_walk(&g, 0, 500, &mut RngState::new(7).rng(), &StopRule::Horizon).unwrap();
        assert_eq!(a, b);
        let c = simulate_walk(&g, 0, 500, &mut RngState::new(8).rng(), &StopRule::Horizon).unwrap();
        assert_ne!(a.path, c.path);
        for w in a.path.windows(2) {
            assert!(g.weight(w[0], w[1]) > 0.0);
        }
    }

    #[test]
    fn one_step_frequency_on_path() {
        let g = generate(&GraphSpec::Path(11), &GenerateOptions::default()).unwrap();
        let right = VertexSet::from_members(11, [6]);
        let stop = StopRule::HitSet(right);
        let counts = first_passage_counts(&g, 5, 100_000, 1, RngState::new(11), &stop).unwrap();
        let p_hat = counts.counts[1] as f64 / 1e5;
        let sigma = (0.25f64 / 1e5).sqrt();
        assert!((p_hat - 0.5).abs() <= 4.0 * sigma, "{p_hat}");
    }

    #[test]
    fn counts_independent_of_thread_layout() {
        let g = generate(&GraphSpec::Path(41), &GenerateOptions::default()).unwrap();
        let stop = StopRule::ExitSet(ball(&g, 20, 3.0));
        let a = first_passage_counts(&g, 20, 10_000, 200, RngState::new(3), &stop).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool
            .install(|| first_passage_counts(&g, 20, 10_000, 200, RngState::new(3), &stop))
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.iter().sum::<u64>() + a.censored, 10_000);
    }
}

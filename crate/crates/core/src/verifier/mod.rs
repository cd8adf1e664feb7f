//! Numerical checks of exit-time tail bounds and heat-kernel lower bounds.
//!
//! Each check computes exact left-hand sides, evaluates the shape of the
//! claimed bound, fits the constants as an extremal envelope (so the fitted
//! bound holds at every row by construction) and records a verdict.

mod exit;
mod hitting;
mod kernel;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{p0_check, write_edge_list, InteriorMargin, WeightedGraph};
use crate::scales::ScaleParams;

pub use exit::{exit_grid, verify_exit_bounds, ExitBoundReports};
pub use hitting::{verify_hitting_chain, verify_lhg, verify_lptt, verify_p1, verify_p2, HittingChainReports};
pub use kernel::{
    verify_cle, verify_dle, verify_heat_kernel_bounds, verify_ndle, verify_tc, verify_tle, verify_tsge,
    verify_vsr, HeatKernelReports,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremId {
    ExitUpper,
    ExitLower,
    P1,
    P2,
    Lptt,
    Lhg,
    Dle,
    Ndle,
    Tsge,
    Tle,
    Cle,
    Vsr,
    Tc,
}

impl TheoremId {
    pub const ALL: [TheoremId; 13] = [
        TheoremId::ExitUpper,
        TheoremId::ExitLower,
        TheoremId::P1,
        TheoremId::P2,
        TheoremId::Lptt,
        TheoremId::Lhg,
        TheoremId::Dle,
        TheoremId::Ndle,
        TheoremId::Tsge,
        TheoremId::Tle,
        TheoremId::Cle,
        TheoremId::Vsr,
        TheoremId::Tc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::ExitUpper => "exit-upper",
            TheoremId::ExitLower => "exit-lower",
            TheoremId::P1 => "p1",
            TheoremId::P2 => "p2",
            TheoremId::Lptt => "lptt",
            TheoremId::Lhg => "lhg",
            TheoremId::Dle => "dle",
            TheoremId::Ndle => "ndle",
            TheoremId::Tsge => "tsge",
            TheoremId::Tle => "tle",
            TheoremId::Cle => "cle",
            TheoremId::Vsr => "vsr",
            TheoremId::Tc => "tc",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown theorem `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Unstable,
}

/// Identifies the graph a report was computed on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphDescriptor {
    pub file: Option<String>,
    /// SHA-256 of the canonical edge list.
    pub hash: String,
    pub vertices: usize,
    pub edges: usize,
}

impl GraphDescriptor {
    pub fn of(g: &WeightedGraph, file: Option<String>) -> Self {
        let digest = Sha256::digest(write_edge_list(g).as_bytes());
        GraphDescriptor { file, hash: hex::encode(digest), vertices: g.vertex_count(), edges: g.edge_count() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportParams {
    pub q: f64,
    #[serde(rename = "Q")]
    pub big_q: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tol: f64,
    pub margin: f64,
    pub p0: f64,
    #[serde(flatten)]
    pub extra: BTreeMap<String, f64>,
}

/// One sweep point. `log_margin ≥ 0` exactly when the fitted bound holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    #[serde(flatten)]
    pub key: BTreeMap<String, f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub log_margin: f64,
}

impl Row {
    fn new(key: &[(&str, f64)], lhs: f64) -> Self {
        Row {
            key: key.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            lhs,
            rhs: f64::NAN,
            log_margin: f64::NAN,
        }
    }

    pub fn get(&self, key: &str) -> f64 {
        self.key.get(key).copied().unwrap_or(f64::NAN)
    }

    /// Sets the bound value for a lower bound `lhs ≥ rhs`.
    fn lower(&mut self, rhs: f64) {
        self.rhs = rhs;
        self.log_margin = (self.lhs / rhs).ln();
    }

    /// Sets the bound value for an upper bound `lhs ≤ rhs`.
    fn upper(&mut self, rhs: f64) {
        self.rhs = rhs;
        self.log_margin = (rhs / self.lhs).ln();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub theorem: TheoremId,
    pub graph: GraphDescriptor,
    pub params: ReportParams,
    pub rows: Vec<Row>,
    pub fitted: BTreeMap<String, f64>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    fn new(theorem: TheoremId, graph: &GraphDescriptor, params: ReportParams) -> Self {
        VerificationReport {
            theorem,
            graph: graph.clone(),
            params,
            rows: Vec::new(),
            fitted: BTreeMap::new(),
            verdict: Verdict::Fail,
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn fitted(&self, key: &str) -> Option<f64> {
        self.fitted.get(key).copied()
    }

    fn fit(&mut self, key: &str, value: f64) {
        self.fitted.insert(key.to_string(), value);
    }

    /// Pass iff every listed constant is positive and finite and every row
    /// holds up to the relative tolerance.
    fn judge(&mut self, positive: &[&str], tol: f64) {
        let constants_ok = positive.iter().all(|k| self.fitted(k).is_some_and(|v| v > 0.0 && v.is_finite()));
        let rows_ok = self.rows.iter().all(|r| r.log_margin >= -tol);
        self.verdict = if constants_ok && rows_ok && !self.rows.is_empty() { Verdict::Pass } else { Verdict::Fail };
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Settings shared by all checks.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub params: ScaleParams,
    /// Overrides the per-check interior margin factor.
    pub margin: Option<f64>,
    /// Relative slack when re-checking fitted bounds.
    pub tol: f64,
    pub vsr_threshold: f64,
    pub stability_factor: f64,
    /// Sweep points per radius in geometric time grids.
    pub points_per_radius: usize,
    pub seed: Option<u64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            params: ScaleParams::default(),
            margin: None,
            tol: 1e-9,
            vsr_threshold: 0.01,
            stability_factor: 2.0,
            points_per_radius: 40,
            seed: None,
        }
    }
}

impl VerifyConfig {
    fn margin_or(&self, default: f64) -> InteriorMargin {
        InteriorMargin::new(self.margin.unwrap_or(default))
    }

    fn report_params(&self, g: &WeightedGraph, margin: &InteriorMargin) -> ReportParams {
        ReportParams {
            q: self.params.q,
            big_q: self.params.big_q,
            c: self.params.c,
            seed: self.seed,
            tol: self.tol,
            margin: margin.factor,
            p0: p0_check(g),
            extra: BTreeMap::new(),
        }
    }
}

/// Fits `y ≥ c·exp(−C·s)` on rows `(s, y)`: `c` is the smallest `y` among
/// rows with the smallest `s`, then `C ≥ 0` is the least value that makes
/// every row hold. Returns `None` if some `y` is not positive.
pub fn fit_lower_exponential(rows: &[(f64, f64)]) -> Option<(f64, f64)> {
    if rows.is_empty() || rows.iter().any(|&(_, y)| !(y > 0.0)) {
        return None;
    }
    let s_min = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let c = rows
        .iter()
        .filter(|r| r.0 <= s_min)
        .map(|r| r.1)
        .fold(f64::INFINITY, f64::min);
    let big_c = rows
        .iter()
        .map(|&(s, y)| if s > 0.0 { (c.ln() - y.ln()) / s } else { 0.0 })
        .fold(0.0, f64::max);
    Some((c, big_c))
}

/// Fits `y ≤ exp(−c·s)` (prefactor one) on rows `(s, y)` with `s > 0`:
/// `c = min (−ln y)/s`.
pub fn fit_upper_exponential(rows: &[(f64, f64)]) -> Option<f64> {
    if rows.is_empty() || rows.iter().any(|&(s, _)| !(s > 0.0)) {
        return None;
    }
    Some(rows.iter().map(|&(s, y)| -y.ln() / s).fold(f64::INFINITY, f64::min))
}

/// Fits `y ≥ c·r^{−D}·exp(−C·s)` on rows `(s, r, y)` with `r ≥ 1`: `c` and
/// `C` from the rows with `r = 1`, then the least `D ≥ 0`.
pub fn fit_lower_with_power(rows: &[(f64, f64, f64)]) -> Option<(f64, f64, f64)> {
    let base: Vec<(f64, f64)> = rows.iter().filter(|r| r.1 <= 1.0).map(|r| (r.0, r.2)).collect();
    let (c, big_c) = if base.is_empty() {
        fit_lower_exponential(&rows.iter().map(|r| (r.0, r.2)).collect::<Vec<_>>())?
    } else {
        fit_lower_exponential(&base)?
    };
    if rows.iter().any(|r| !(r.2 > 0.0)) {
        return None;
    }
    let d = rows
        .iter()
        .filter(|r| r.1 > 1.0)
        .map(|&(s, r, y)| (c.ln() - big_c * s - y.ln()) / r.ln())
        .fold(0.0, f64::max);
    Some((c, big_c, d))
}

/// Marks `fine` unstable when `fitted[key]` differs from the coarse level by
/// more than the stability factor.
pub fn compare_levels(coarse: &VerificationReport, fine: &mut VerificationReport, key: &str, factor: f64) {
    let (Some(a), Some(b)) = (coarse.fitted(key), fine.fitted(key)) else {
        fine.verdict = Verdict::Unstable;
        fine.notes.push(format!("`{key}` missing on one level"));
        return;
    };
    let ratio = if a == b {
        1.0
    } else if a > 0.0 && b > 0.0 {
        a.max(b) / a.min(b)
    } else {
        f64::INFINITY
    };
    fine.fit(&format!("{key}_coarse"), a);
    fine.fit("stability_ratio", ratio);
    if ratio > factor && fine.verdict == Verdict::Pass {
        fine.verdict = Verdict::Unstable;
    }
}

/// Geometric grid of integers in `[lo, hi]`, at most `points` long.
pub fn geometric_grid(lo: usize, hi: usize, points: usize) -> Vec<usize> {
    if hi <= lo || points <= 1 {
        return vec![lo.max(hi.min(lo))];
    }
    let ratio = (hi as f64 / lo as f64).powf(1.0 / (points - 1) as f64);
    let mut out: Vec<usize> =
        (0..points).map(|i| ((lo as f64) * ratio.powi(i as i32)).round() as usize).collect();
    out.push(hi);
    out.iter_mut().for_each(|v| *v = (*v).clamp(lo, hi));
    out.sort_unstable();
    out.dedup();
    out
}

/// Default inputs for a check run from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub y: Option<usize>,
    /// Single radius instead of the default radius list.
    pub radius: Option<usize>,
    /// Time horizon for the diagonal bound.
    pub n: Option<usize>,
}

/// Runs one check with default sweeps around `x`.
pub fn run_theorem(
    id: TheoremId,
    g: &WeightedGraph,
    desc: &GraphDescriptor,
    x: usize,
    opts: &RunOptions,
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    g.check_vertex(x)?;
    let radii = |defaults: &[usize]| opts.radius.map(|r| vec![r]).unwrap_or_else(|| defaults.to_vec());
    match id {
        TheoremId::ExitUpper | TheoremId::ExitLower => {
            let sweep = exit_grid(g, x, &radii(&[4, 8, 12]), cfg)?;
            let both = verify_exit_bounds(g, desc, x, &sweep, cfg)?;
            Ok(if id == TheoremId::ExitUpper { both.upper } else { both.lower })
        }
        TheoremId::P1 => verify_p1(g, desc, x, &radii(&[2, 4, 8, 16, 32]), cfg),
        TheoremId::Lptt => verify_lptt(g, desc, x, &radii(&[1, 2, 3, 4]), cfg),
        TheoremId::P2 => {
            let rs = radii(&[1, 2, 3]);
            let lptt = verify_lptt(g, desc, x, &rs, cfg)?;
            let c1 = lptt.fitted("c1").unwrap_or(0.0);
            verify_p2(g, desc, x, &rs, c1, cfg)
        }
        TheoremId::Lhg => verify_lhg(g, desc, x, &radii(&[1, 2, 3, 4]), cfg),
        TheoremId::Dle => verify_dle(g, desc, x, opts.n.unwrap_or(2000), cfg),
        TheoremId::Vsr => verify_vsr(g, desc, x, &radii(&[1, 2, 4, 8, 16, 32]), cfg),
        TheoremId::Tc => {
            let rs = radii(&[2, 4, 8]);
            verify_tc(g, desc, x, &rs, cfg)
        }
        TheoremId::Ndle | TheoremId::Tsge | TheoremId::Tle | TheoremId::Cle => {
            let ys = match opts.y {
                Some(y) => vec![y],
                None => kernel::default_targets(g, x, &radii(&[2, 4, 8, 16]), cfg),
            };
            match id {
                TheoremId::Ndle => verify_ndle(g, desc, x, &ys, cfg),
                TheoremId::Tsge => verify_tsge(g, desc, x, &ys, cfg),
                TheoremId::Tle => verify_tle(g, desc, x, &ys, cfg),
                _ => verify_cle(g, desc, x, &ys, cfg),
            }
        }
    }
}

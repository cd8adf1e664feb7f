//! Heat-kernel lower bounds: diagonal, near-diagonal and off-diagonal.

use rayon::prelude::*;

use super::{
    fit_lower_exponential, fit_lower_with_power, geometric_grid, GraphDescriptor, Row, TheoremId,
    VerificationReport, VerifyConfig,
};
use crate::error::{Error, Result};
use crate::graph::{ball, distance, sphere, volume, InteriorMargin, WeightedGraph};
use crate::potential::vsr_constant_within;
use crate::scales::{comparison_constants, fit_exponents, l_scale, MeanExitCache, ScaleParams};
use crate::stopping::{mean_exit_profile, INVERSE_SLACK};
use crate::walk::transition_series;

/// Points per target in the off-diagonal time grids.
const OFF_DIAGONAL_POINTS: usize = 20;
/// Points per target in the near-diagonal time grid.
const NEAR_DIAGONAL_POINTS: usize = 10;

pub struct HeatKernelReports {
    pub dle: VerificationReport,
    /// Absent when the graph fails the VSR gate.
    pub ndle: Option<VerificationReport>,
    pub tsge: Option<VerificationReport>,
    pub tle: VerificationReport,
    pub cle: VerificationReport,
}

/// All heat-kernel checks around `x`. The VSR-dependent ones are skipped,
/// with the gate failure returned in `notes` of the other reports.
pub fn verify_heat_kernel_bounds(
    g: &WeightedGraph,
    desc: &GraphDescriptor,
    x: usize,
    ys: &[usize],
    n_max: usize,
    cfg: &VerifyConfig,
) -> Result<HeatKernelReports> {
    let mut dle = verify_dle(g, desc, x, n_max, cfg)?;
    let mut tle = verify_tle(g, desc, x, ys, cfg)?;
    let cle = verify_cle(g, desc, x, ys, cfg)?;
    let (ndle, tsge) = match verify_tsge(g, desc, x, ys, cfg) {
        Ok(t) => (Some(verify_ndle(g, desc, x, ys, cfg)?), Some(t)),
        Err(Error::NotVsr(v)) => {
            let note = format!("VSR gate failed (min constant {v:.4}); tsge and ndle skipped");
            dle.notes.push(note.clone());
            tle.notes.push(note);
            (None, None)
        }
        Err(e) => return Err(e),
    };
    Ok(HeatKernelReports { dle, ndle, tsge, tle, cle })
}

/// `E(x, R)` for `R = 1, 2, …` until it reaches `target`, the ball leaves the
/// margin, or the ball covers the graph.
fn profile_until(g: &WeightedGraph, x: usize, target: f64, margin: &InteriorMargin) -> Result<Vec<f64>> {
    let cache = MeanExitCache::new(g);
    let mut out = Vec::new();
    let mut r = 1;
    while margin.is_valid(g, x, r as f64) {
        let e = cache.get(x, r as f64)?;
        if !e.is_finite() {
            break;
        }
        out.push(e);
        if e >= target {
            break;
        }
        r += 1;
    }
    Ok(out)
}

/// `e(x, n)` on a profile, if the profile reaches `n`.
fn inverse(profile: &[f64], n: f64) -> Option<usize> {
    profile.iter().position(|&e| e >= n * (1.0 - INVERSE_SLACK)).map(|i| i + 1)
}

/// Smallest-id vertex of `S(x, d)` for each admissible `d`.
pub(super) fn default_targets(g: &WeightedGraph, x: usize, ds: &[usize], cfg: &VerifyConfig) -> Vec<usize> {
    let margin = cfg.margin_or(2.0);
    ds.iter()
        .filter(|&&d| d > 0 && margin.is_valid(g, x, d as f64))
        .filter_map(|&d| sphere(g, x, d).members().first().copied())
        .collect()
}

/// `p_{2n}(x,x)·V(x, e(x,2n))` for `n = 1..=n_max`.
pub fn verify_dle(
    g: &WeightedGraph,
    desc: &GraphDescriptor,
    x: usize,
    n_max: usize,
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    g.check_vertex(x)?;
    if n_max == 0 {
        return Err(Error::EmptySweep);
    }
    let margin = cfg.margin_or(1.0);
    let mut rep = VerificationReport::new(TheoremId::Dle, desc, cfg.report_params(g, &margin));
    let profile = profile_until(g, x, 2.0 * n_max as f64, &margin)?;
    let series = transition_series(g, x, &[x], 2 * n_max)?;
    let mu = g.measure(x);
    let mut dropped = 0;
    for n in 1..=n_max {
        let Some(e) = inverse(&profile, 2.0 * n as f64) else {
            dropped += 1;
            continue;
        };
        let v = volume(g, x, e as f64);
        rep.rows.push(Row::new(&[("n", n as f64), ("e", e as f64), ("V", v)], series[2 * n][0] / mu * v));
    }
    if dropped > 0 {
        rep.notes.push(format!("{dropped} rows dropped: e(x, 2n) beyond the interior-valid profile"));
    }
    if rep.rows.is_empty() {
        return Err(Error::EmptySweep);
    }
    let c = rep.rows.iter().map(|r| r.lhs).fold(f64::INFINITY, f64::min);
    rep.fit("c", c);
    for row in &mut rep.rows {
        row.lower(c);
    }
    rep.judge(&["c"], cfg.tol);
    Ok(rep)
}

/// Minimum of `vsr_constant(x, r)` over the sampled radii; fails below the
/// configured threshold.
fn vsr_gate(g: &WeightedGraph, x: usize, radii: &[usize], cfg: &VerifyConfig) -> Result<f64> {
    let margin = cfg.margin_or(2.0);
    let mut values = Vec::new();
    for &r in radii {
        if r > 0 && margin.is_valid(g, x, r as f64) && !sphere(g, x, r).is_empty() {
            values.push(vsr_constant_within(g, x, r, &margin)?);
        }
    }
    if values.is_empty() {
        return Err(Error::EmptySweep);
    }
    let min = values.into_iter().fold(1.0, f64::min);
    if min < cfg.vsr_threshold {
        return Err(Error::NotVsr(min));
    }
    Ok(min)
}

fn target_distances(g: &WeightedGraph, x: usize, ys: &[usize], cfg: &VerifyConfig) -> Result<Vec<(usize, usize)>> {
    let margin = cfg.margin_or(2.0);
    let mut out = Vec::new();
    for &y in ys {
        let d = distance(g, x, y)?;
        if d > 0 && margin.is_valid(g, x, d as f64) {
            out.push((y, d));
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySweep);
    }
    Ok(out)
}

/// `p̃_m(x,y)·V(x, e(x,m))` for `m ≥ (2/c′)·E(x, 2d)`, with `c′` the measured
/// VSR constant at the sampled distances.
pub fn verify_ndle(
    g: &WeightedGraph,
    desc: &GraphDescriptor,
    x: usize,
    ys: &[usize],
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    g.check_vertex(x)?;
    let targets = target_distances(g, x, ys, cfg)?;
    let ds: Vec<usize> = targets.iter().map(|t| t.1).collect();
    let c_prime = vsr_gate(g, x, &ds, cfg)?;
    let margin = cfg.margin_or(1.0);
    let mut rep = VerificationReport::new(TheoremId::Ndle, desc, cfg.report_params(g, &margin));
    rep.params.extra.insert("vsr_threshold".into(), cfg.vsr_threshold);
    let cache = MeanExitCache::new(g);
    let mut plan = Vec::new();
    for &(y, d) in &targets {
        let e2 = cache.get(x, 2.0 * d as f64)?;
        if !e2.is_finite() {
            continue;
        }
        let m0 = (2.0 / c_prime * e2).ceil() as usize;
        for m in geometric_grid(m0, 2 * m0, NEAR_DIAGONAL_POINTS) {
            plan.push((y, d, m));
        }
    }
    let m_top = plan.iter().map(|p| p.2).max().ok_or(Error::EmptySweep)?;
    let profile = profile_until(g, x, m_top as f64, &margin)?;
    let ys_only: Vec<usize> = targets.iter().map(|t| t.0).collect();
    let series = transition_series(g, x, &ys_only, m_top + 1)?;
    let mut dropped = 0;
    for (y, d, m) in plan {
        let Some(e) = inverse(&profile, m as f64) else {
            dropped += 1;
            continue;
        };
        let j = ys_only.iter().position(|&v| v == y).unwrap();
        let pt = (series[m][j] + series[m + 1][j]) / g.measure(y);
        let v = volume(g, x, e as f64);
        rep.rows.push(Row::new(&[("y", y as f64), ("d", d as f64), ("m", m as f64), ("e", e as f64)], pt * v));
    }
    if dropped > 0 {
        rep.notes.push(format!("{dropped} rows dropped: e(x, m) beyond the interior-valid profile"));
    }
    if rep.rows.is_empty() {
        return Err(Error::EmptySweep);
    }
    let c = rep.rows.iter().map(|r| r.lhs).fold(f64::INFINITY, f64::min);
    rep.fit("c", c);
    rep.fit("c_prime", c_prime);
    for row in &mut rep.rows {
        row.lower(c);
    }
    rep.judge(&["c", "c_prime"], cfg.tol);
    Ok(rep)
}

/// A sweep row of the off-diagonal bounds before fitting.
struct OffDiagonal {
    y: usize,
    d: usize,
    n: usize,
    l: usize,
    e: usize,
    /// `p̃_n(x,y)·V(x, e(x,n))`.
    scaled: f64,
}

/// Rows `(y, n)` with `n` on a geometric grid over `[d, E(x, 2d)]`.
fn off_diagonal_rows(
    g: &WeightedGraph,
    x: usize,
    targets: &[(usize, usize)],
    cfg: &VerifyConfig,
    notes: &mut Vec<String>,
) -> Result<Vec<OffDiagonal>> {
    let cache = MeanExitCache::new(g);
    let mut plan = Vec::new();
    for &(y, d) in targets {
        let e2 = cache.get(x, 2.0 * d as f64)?;
        if !e2.is_finite() {
            notes.push(format!("target {y} dropped: B(x, 2d) covers the graph"));
            continue;
        }
        let hi = (e2.floor() as usize).max(d);
        for n in geometric_grid(d, hi, OFF_DIAGONAL_POINTS) {
            plan.push((y, d, n));
        }
    }
    let n_top = plan.iter().map(|p| p.2).max().ok_or(Error::EmptySweep)?;
    let profile = profile_until(g, x, n_top as f64, &cfg.margin_or(1.0))?;
    let ys: Vec<usize> = targets.iter().map(|t| t.0).collect();
    let series = transition_series(g, x, &ys, n_top + 1)?;
    let p9 = ScaleParams { c: 9.0, ..cfg.params };
    let rows: Vec<Option<OffDiagonal>> = plan
        .par_iter()
        .map(|&(y, d, n)| {
            let Some(e) = inverse(&profile, n as f64) else {
                return Ok(None);
            };
            let j = ys.iter().position(|&v| v == y).unwrap();
            let pt = (series[n][j] + series[n + 1][j]) / g.measure(y);
            let l = l_scale(&cache, x, y, n as f64 / 2.0, d, &p9)?;
            Ok(Some(OffDiagonal { y, d, n, l, e, scaled: pt * volume(g, x, e as f64) }))
        })
        .collect::<Result<_>>()?;
    let dropped = rows.iter().filter(|r| r.is_none()).count();
    if dropped > 0 {
        notes.push(format!("{dropped} rows dropped: e(x, n) beyond the interior-valid profile"));
    }
    let rows: Vec<OffDiagonal> = rows.into_iter().flatten().collect();
    if rows.is_empty() {
        return Err(Error::EmptySweep);
    }
    Ok(rows)
}

fn base_key(r: &OffDiagonal) -> Vec<(&'static str, f64)> {
    vec![("y", r.y as f64), ("d", r.d as f64), ("n", r.n as f64), ("l", r.l as f64), ("e", r.e as f64)]
}

/// Fit of `p̃_n(x,y) ≥ c·exp(−C·l₉(x,y,n/2,d)) / V(x, e(x,n))`, gated on VSR.
pub fn verify_tsge(
    g: &WeightedGraph,
    desc: &GraphDescriptor,
    x: usize,
    ys: &[usize],
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    g.check_vertex(x)?;
    let targets = target_distances(g, x, ys, cfg)?;
    let d_max = targets.iter().map(|t| t.1).max().unwrap();
    let mut radii: Vec<usize> = std::iter::successors(Some(1usize), |r| Some(2 * r)).take_while(|&r| r <= d_max).collect();
    radii.extend(targets.iter().map(|t| t.1));
    radii.sort_unstable();
    radii.dedup();
    let vsr = vsr_gate(g, x, &radii, cfg)?;
    let margin = cfg.margin_or(2.0);
    let mut rep = VerificationReport::new(TheoremId::Tsge, desc, cfg.report_params(g, &margin));
    rep.params.extra.insert("vsr_threshold".into(), cfg.vsr_threshold);
    let rows = off_diagonal_rows(g, x, &targets, cfg, &mut rep.notes)?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.l as f64, r.scaled)).collect();
    rep.rows = rows.iter().map(|r| Row::new(&base_key(r), r.scaled)).collect();
    rep.fit("vsr_min", vsr);
    if let Some((c, big_c)) = fit_lower_exponential(&pts) {
        rep.fit("c", c);
        rep.fit("C", big_c);
        for row in &mut rep.rows {
            let l = row.get("l");
            row.lower(c * (-big_c * l).exp());
        }
    }
    rep.judge(&["c", "vsr_min"], cfg.tol);
    Ok(rep)
}

/// Fit of `p̃_n(x,y) ≥ c·r^{−D}·exp(−C·l) / V(x, e(x,n))` with
/// `l = l₉(x,y,n/2)` and `r = d/(3l)`, taken as at least 1.
pub fn verify_tle(
    g: &WeightedGraph,
    desc: &GraphDescriptor,
    x: usize,
    ys: &[usize],
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    g.check_vertex(x)?;
    let targets = target_distances(g, x, ys, cfg)?;
    let margin = cfg.margin_or(2.0);
    let mut rep = VerificationReport::new(TheoremId::Tle, desc, cfg.report_params(g, &margin));
    let rows = off_diagonal_rows(g, x, &targets, cfg, &mut rep.notes)?;
    let pts: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.l as f64, chain_radius(r), r.scaled)).collect();
    rep.rows = rows
        .iter()
        .map(|r| {
            let mut key = base_key(r);
            key.push(("r", chain_radius(r)));
            Row::new(&key, r.scaled)
        })
        .collect();
    fit_power_rows(&mut rep, &pts, "l");
    judge_power(&mut rep, cfg.tol);
    Ok(rep)
}

fn chain_radius(r: &OffDiagonal) -> f64 {
    (r.d as f64 / (3.0 * r.l as f64)).max(1.0)
}

fn fit_power_rows(rep: &mut VerificationReport, pts: &[(f64, f64, f64)], exponent_key: &str) {
    match fit_lower_with_power(pts) {
        Some((c, big_c, d)) => {
            rep.fit("c", c);
            rep.fit("C", big_c);
            rep.fit("D", d);
            for row in &mut rep.rows {
                let (s, r) = (row.get(exponent_key), row.get("r"));
                row.lower(c * r.powf(-d) * (-big_c * s).exp());
            }
        }
        None => rep.notes.push("some heat-kernel value is zero; no envelope exists".into()),
    }
}

/// `c > 0` and finite `C, D ≥ 0`; `D = 0` is an admissible fit.
fn judge_power(rep: &mut VerificationReport, tol: f64) {
    rep.judge(&["c"], tol);
    let finite = ["C", "D"].iter().all(|k| rep.fitted(k).is_some_and(|v| v >= 0.0 && v.is_finite()));
    if !finite {
        rep.verdict = super::Verdict::Fail;
    }
}

/// As [`verify_tle`] with `l` replaced by `[E(x,d)/n]^{1/(β′−1)}`.
pub fn verify_cle(
    g: &WeightedGraph,
    desc: &GraphDescriptor,
    x: usize,
    ys: &[usize],
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    g.check_vertex(x)?;
    let targets = target_distances(g, x, ys, cfg)?;
    let margin = cfg.margin_or(2.0);
    let mut rep = VerificationReport::new(TheoremId::Cle, desc, cfg.report_params(g, &margin));
    let unit = InteriorMargin::new(cfg.margin.unwrap_or(1.0));
    let mut r_max = 1;
    while r_max < 64 && unit.is_valid(g, x, (r_max + 1) as f64) && ball(g, x, (r_max + 1) as f64).len() < g.vertex_count() {
        r_max += 1;
    }
    let fits = fit_exponents(&mean_exit_profile(g, x, r_max, &unit)?)?;
    let beta_prime = fits.beta_prime.exponent;
    rep.fit("beta_prime", beta_prime);
    if !(beta_prime > 1.0) {
        rep.notes.push(format!("beta' = {beta_prime:.4} is not above 1"));
        judge_power(&mut rep, cfg.tol);
        return Ok(rep);
    }
    let rows = off_diagonal_rows(g, x, &targets, cfg, &mut rep.notes)?;
    let cache = MeanExitCache::new(g);
    let mut pts = Vec::with_capacity(rows.len());
    for r in &rows {
        let s = (cache.get(x, r.d as f64)? / r.n as f64).powf(1.0 / (beta_prime - 1.0));
        let mut key = base_key(r);
        key.push(("r", chain_radius(r)));
        key.push(("s", s));
        rep.rows.push(Row::new(&key, r.scaled));
        pts.push((s, chain_radius(r), r.scaled));
    }
    fit_power_rows(&mut rep, &pts, "s");
    judge_power(&mut rep, cfg.tol);
    Ok(rep)
}

/// `vsr_constant(x, r)` per radius against the configured threshold.
pub fn verify_vsr(
    g: &WeightedGraph,
    desc: &GraphDescriptor,
    x: usize,
    radii: &[usize],
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    g.check_vertex(x)?;
    let margin = cfg.margin_or(2.0);
    let mut rep = VerificationReport::new(TheoremId::Vsr, desc, cfg.report_params(g, &margin));
    rep.params.extra.insert("vsr_threshold".into(), cfg.vsr_threshold);
    for &r in radii {
        if r == 0 || !margin.is_valid(g, x, r as f64) || sphere(g, x, r).is_empty() {
            continue;
        }
        let mut row = Row::new(&[("r", r as f64)], vsr_constant_within(g, x, r, &margin)?);
        row.lower(cfg.vsr_threshold);
        rep.rows.push(row);
    }
    if rep.rows.is_empty() {
        return Err(Error::EmptySweep);
    }
    let c = rep.rows.iter().map(|r| r.lhs).fold(1.0, f64::min);
    rep.fit("c", c);
    rep.judge(&["c"], 0.0);
    Ok(rep)
}

/// `C_T`, `A_T` and the `Ē` constant on samples `(x, y, R)` with `y = x` and
/// `y` on `S(x, R − 1)`.
pub fn verify_tc(
    g: &WeightedGraph,
    desc: &GraphDescriptor,
    x: usize,
    radii: &[usize],
    cfg: &VerifyConfig,
) -> Result<VerificationReport> {
    g.check_vertex(x)?;
    let margin = cfg.margin_or(3.0);
    let mut samples = Vec::new();
    for &r in radii {
        if r == 0 || !margin.is_valid(g, x, r as f64) {
            continue;
        }
        samples.push((x, x, r));
        if r >= 2 {
            if let Some(&y) = sphere(g, x, r - 1).members().first() {
                samples.push((x, y, r));
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptySweep);
    }
    let cache = MeanExitCache::new(g);
    let consts = comparison_constants(&cache, &samples)?;
    let mut rep = VerificationReport::new(TheoremId::Tc, desc, cfg.report_params(g, &margin));
    for &(x, y, r) in &samples {
        let ratio = cache.get(y, 2.0 * r as f64)? / cache.get(x, r as f64)?;
        let mut row = Row::new(&[("x", x as f64), ("y", y as f64), ("R", r as f64)], ratio);
        row.upper(consts.c_t);
        rep.rows.push(row);
    }
    rep.fit("C_T", consts.c_t);
    rep.fit("A_T", consts.a_t as f64);
    rep.fit("Ebar", consts.ebar);
    rep.judge(&["C_T", "A_T", "Ebar"], cfg.tol);
    Ok(rep)
}

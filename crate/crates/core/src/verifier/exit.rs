//! Upper and lower tails of the exit time from balls.

use rayon::prelude::*;

use super::{
    fit_lower_exponential, fit_upper_exponential, geometric_grid, GraphDescriptor, Row, TheoremId,
    VerificationReport, VerifyConfig,
};
use crate::error::{Error, Result};
use crate::graph::{ball, sphere, WeightedGraph};
use crate::scales::{k_scale, nu_scale, MeanExitCache};
use crate::stopping::exit_time_cdf;

/// Default interior factor: the lower bound looks at the sphere `S(x, 2R)`.
const EXIT_MARGIN: f64 = 2.0;

pub struct ExitBoundReports {
    /// `P(T_{x,R} < n) ≤ C·exp(−c·k(x,n,R))`.
    pub upper: VerificationReport,
    /// `P(T_{x,R} < n) ≥ c·exp(−C·ν(x,n,R))`.
    pub lower: VerificationReport,
}

/// `(R, n)` pairs with `n` on a geometric grid from `R + 1` to `⌈4·E(x,R)⌉`.
///
/// The grid starts above `R`: the walk needs at least `R` steps to leave
/// `B(x, R)`, so `P(T_{x,R} < R) = 0`. Radii outside the interior margin or
/// with an empty `S(x, 2R)` are skipped.
pub fn exit_grid(g: &WeightedGraph, x: usize, radii: &[usize], cfg: &VerifyConfig) -> Result<Vec<(usize, usize)>> {
    let margin = cfg.margin_or(EXIT_MARGIN);
    let cache = MeanExitCache::new(g);
    let mut out = Vec::new();
    for &r in radii {
        if r == 0 || !margin.is_valid(g, x, r as f64) || sphere(g, x, 2 * r).is_empty() {
            continue;
        }
        let e = cache.get(x, r as f64)?;
        if !e.is_finite() {
            continue;
        }
        let hi = ((4.0 * e).ceil() as usize).max(r + 1);
        out.extend(geometric_grid(r + 1, hi, cfg.points_per_radius).into_iter().map(|n| (r, n)));
    }
    if out.is_empty() {
        return Err(Error::EmptySweep);
    }
    Ok(out)
}

/// Exact `P(T_{x,R} < n)` against `k(x,n,R)` and `ν(x,n,R)` on each sweep row.
pub fn verify_exit_bounds(
    g: &WeightedGraph,
    desc: &GraphDescriptor,
    x: usize,
    sweep: &[(usize, usize)],
    cfg: &VerifyConfig,
) -> Result<ExitBoundReports> {
    cfg.params.validate()?;
    g.check_vertex(x)?;
    let margin = cfg.margin_or(EXIT_MARGIN);
    let mut notes = Vec::new();
    let mut kept: Vec<(usize, usize)> = Vec::new();
    for &(r, n) in sweep {
        if r > 0 && margin.is_valid(g, x, r as f64) {
            kept.push((r, n));
        } else {
            notes.push(format!("dropped (R = {r}, n = {n}): not interior-valid"));
        }
    }
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() {
        return Err(Error::EmptySweep);
    }

    let mut horizons: Vec<(usize, usize)> = Vec::new();
    for &(r, n) in &kept {
        match horizons.last_mut() {
            Some(h) if h.0 == r => h.1 = h.1.max(n),
            _ => horizons.push((r, n)),
        }
    }
    let cdfs: Vec<(usize, Vec<f64>)> = horizons
        .par_iter()
        .map(|&(r, n_max)| Ok((r, exit_time_cdf(g, x, &ball(g, x, r as f64), n_max)?.values)))
        .collect::<Result<_>>()?;

    let cache = MeanExitCache::new(g);
    let values: Vec<(f64, usize, usize)> = kept
        .par_iter()
        .map(|&(r, n)| {
            let cdf = &cdfs.iter().find(|c| c.0 == r).unwrap().1;
            let k = k_scale(&cache, x, n as f64, r, &cfg.params)?;
            let nu = nu_scale(&cache, x, n as f64, r, &cfg.params)?;
            Ok((cdf[n], k, nu))
        })
        .collect::<Result<_>>()?;

    let params = cfg.report_params(g, &margin);
    let mut upper = VerificationReport::new(TheoremId::ExitUpper, desc, params.clone());
    let mut lower = VerificationReport::new(TheoremId::ExitLower, desc, params);
    upper.notes = notes.clone();
    lower.notes = notes;
    for (&(r, n), &(p, k, nu)) in kept.iter().zip(&values) {
        upper.rows.push(Row::new(&[("R", r as f64), ("n", n as f64), ("k", k as f64)], p));
        lower.rows.push(Row::new(&[("R", r as f64), ("n", n as f64), ("nu", nu as f64)], p));
    }

    let up_pts: Vec<(f64, f64)> = upper.rows.iter().map(|r| (r.get("k"), r.lhs)).collect();
    if let Some(c) = fit_upper_exponential(&up_pts) {
        upper.fit("c", c);
        upper.fit("C", 1.0);
        for row in &mut upper.rows {
            let k = row.get("k");
            row.upper((-c * k).exp());
        }
    }
    upper.judge(&["c", "C"], cfg.tol);

    let low_pts: Vec<(f64, f64)> = lower.rows.iter().map(|r| (r.get("nu"), r.lhs)).collect();
    if let Some((c, big_c)) = fit_lower_exponential(&low_pts) {
        lower.fit("c", c);
        lower.fit("C", big_c);
        for row in &mut lower.rows {
            let nu = row.get("nu");
            row.lower(c * (-big_c * nu).exp());
        }
        lower.judge(&["c"], cfg.tol);
        if !big_c.is_finite() {
            lower.verdict = super::Verdict::Fail;
        }
    } else {
        lower.notes.push("some P(T < n) is zero; no lower envelope exists".into());
        lower.judge(&["c"], cfg.tol);
    }
    Ok(ExitBoundReports { upper, lower })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GenerateOptions, GraphSpec};

    #[test]
    fn path_fits_exist_and_hold() {
        let g = generate(&GraphSpec::Path(201), &GenerateOptions::default()).unwrap();
        let desc = GraphDescriptor::of(&g, None);
        let cfg = VerifyConfig { points_per_radius: 12, ..VerifyConfig::default() };
        let sweep = exit_grid(&g, 100, &[4, 8], &cfg).unwrap();
        assert!(sweep.iter().all(|&(r, n)| n > r));
        let rep = verify_exit_bounds(&g, &desc, 100, &sweep, &cfg).unwrap();
        assert!(rep.upper.passed(), "{:?}", rep.upper.fitted);
        assert!(rep.lower.passed(), "{:?}", rep.lower.fitted);
        for row in rep.lower.rows.iter().chain(&rep.upper.rows) {
            assert!(row.log_margin >= -1e-12);
        }
        let json: serde_json::Value = serde_json::from_str(&rep.lower.to_json()).unwrap();
        assert_eq!(json["theorem"], "exit-lower");
        assert_eq!(json["verdict"], "pass");
        assert!(json["rows"][0]["nu"].is_number());
    }

    #[test]
    fn row_at_n_equal_r_breaks_lower_bound() {
        let g = generate(&GraphSpec::Path(201), &GenerateOptions::default()).unwrap();
        let desc = GraphDescriptor::of(&g, None);
        let rep = verify_exit_bounds(&g, &desc, 100, &[(4, 4), (4, 10)], &VerifyConfig::default()).unwrap();
        assert_eq!(rep.lower.rows[0].lhs, 0.0);
        assert!(!rep.lower.passed());
    }

    #[test]
    fn empty_sweep_is_an_error() {
        let g = generate(&GraphSpec::Path(21), &GenerateOptions::default()).unwrap();
        let desc = GraphDescriptor::of(&g, None);
        assert!(matches!(
            verify_exit_bounds(&g, &desc, 10, &[(8, 20)], &VerifyConfig::default()),
            Err(Error::EmptySweep)
        ));
    }
}

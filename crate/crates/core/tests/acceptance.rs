//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use walklab::graph::{ball, generate, sphere, GenerateOptions, GraphSpec};
use walklab::potential::{annulus_resistance, capacity_resistance, harnack_constant, vsr_constant, GreenSolver};
use walklab::scales::{comparison_constants, fit_exponents, MeanExitCache};
use walklab::stopping::{exit_time_cdf, mean_exit_profile, mean_exit_time, mean_exit_times, survival_sum};
use walklab::verifier::{
    compare_levels, exit_grid, verify_dle, verify_exit_bounds, verify_tle, verify_tsge, GraphDescriptor, Verdict,
    VerifyConfig,
};
use walklab::walk::{first_passage_counts, RngState, StopRule};
use walklab::{InteriorMargin, VertexSet, WeightedGraph};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn gen(spec: GraphSpec) -> WeightedGraph {
    generate(&spec, &GenerateOptions::default()).unwrap()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Path of 401 vertices, center 200: E(x, R) = R².
fn mean_exit_exact() -> Outcome {
    let g = gen(GraphSpec::Path(401));
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for r in 1..=100 {
        let e = mean_exit_time(&g, 200, r as f64).map_err(err)?;
        worst = worst.max((e - (r * r) as f64).abs());
    }
    let took = start.elapsed();
    ensure!(worst <= 1e-9, "max |E - R^2| = {worst:e}");
    ensure!(took < Duration::from_secs(5), "took {took:?}");
    Ok(format!("max |E - R^2| = {worst:.2e} over R <= 100 in {took:.2?}"))
}

/// Σ P(T > n) = E(x, R).
fn survival_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for (g, x) in [(gen(GraphSpec::Path(401)), 200), (gen(GraphSpec::Sg(4)), 0)] {
        for r in 1..=16 {
            let b = ball(&g, x, r as f64);
            let (sum, _) = survival_sum(&g, x, &b, 1e-15, 10_000_000).map_err(err)?;
            let e = mean_exit_time(&g, x, r as f64).map_err(err)?;
            worst = worst.max((sum - e).abs());
        }
    }
    ensure!(worst <= 1e-8, "max deviation {worst:e}");
    Ok(format!("max |sum - E| = {worst:.2e} on path and sg(4), R <= 16"))
}

/// Σ_z g^B(x,z) μ(z) = E_x(T_B) and g^B symmetric, on random balls of sg(4).
fn green_identity() -> Outcome {
    let g = gen(GraphSpec::Sg(4));
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut id_err, mut sym_err): (f64, f64) = (0.0, 0.0);
    let mut done = 0;
    while done < 20 {
        let x = rng.random_range(0..g.vertex_count());
        let r = rng.random_range(1..=8) as f64;
        let b = ball(&g, x, r);
        if b.len() == g.vertex_count() {
            continue;
        }
        let solver = GreenSolver::new(&g, &b).map_err(err)?;
        let cols: Vec<_> = b.members().iter().map(|&z| solver.column(z)).collect::<Result<_, _>>().map_err(err)?;
        let x_col = &cols[b.members().binary_search(&x).unwrap()];
        let sum: f64 = b.members().iter().zip(&cols).map(|(&z, col)| col.at(x) * g.measure(z)).sum();
        let e = mean_exit_times(&g, &b, &Default::default()).map_err(err)?[x];
        id_err = id_err.max((sum - e).abs());
        for (&z, col) in b.members().iter().zip(&cols) {
            sym_err = sym_err.max((col.at(x) - x_col.at(z)).abs());
        }
        done += 1;
    }
    ensure!(id_err <= 1e-8, "identity error {id_err:e}");
    ensure!(sym_err <= 1e-10, "symmetry error {sym_err:e}");
    Ok(format!("identity {id_err:.2e}, symmetry {sym_err:.2e} on 20 balls"))
}

fn resistance_values() -> Outcome {
    let path = gen(GraphSpec::Path(41));
    let rho_path = annulus_resistance(&path, 20, 1.0, 4.0).map_err(err)?;
    ensure!((rho_path - 2.0).abs() <= 1e-9, "path rho(x,1,4) = {rho_path}");
    let cycle = gen(GraphSpec::Cycle(4));
    let single = |v| VertexSet::from_members(4, [v]);
    let rho_cycle = capacity_resistance(&cycle, &single(0), &single(2)).map_err(err)?.resistance;
    ensure!((rho_cycle - 1.0).abs() <= 1e-9, "cycle rho = {rho_cycle}");

    let g = gen(GraphSpec::Sg(4));
    let n = g.vertex_count();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cap_err: f64 = 0.0;
    for _ in 0..50 {
        let a = VertexSet::from_members(n, (0..n).filter(|_| rng.random_bool(0.1)));
        let b = VertexSet::from_members(n, (0..n).filter(|_| rng.random_bool(0.1))).difference(&a);
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let ab = capacity_resistance(&g, &a, &b).map_err(err)?.capacity;
        let ba = capacity_resistance(&g, &b, &a).map_err(err)?.capacity;
        cap_err = cap_err.max((ab - ba).abs());
    }
    ensure!(cap_err <= 1e-10, "cap asymmetry {cap_err:e}");

    let mut triples = 0;
    while triples < 50 {
        let x = rng.random_range(0..n);
        let r = rng.random_range(1..6usize);
        let big_r = r + rng.random_range(1..6usize);
        if ball(&g, x, (big_r + 1) as f64).len() == n {
            continue;
        }
        let base = annulus_resistance(&g, x, r as f64, big_r as f64).map_err(err)?;
        let wider = annulus_resistance(&g, x, r as f64, (big_r + 1) as f64).map_err(err)?;
        ensure!(wider >= base * (1.0 - 1e-12), "rho({x},{r},R) decreased in R at R = {big_r}");
        if r + 1 < big_r {
            let thicker = annulus_resistance(&g, x, (r + 1) as f64, big_r as f64).map_err(err)?;
            ensure!(thicker <= base * (1.0 + 1e-12), "rho({x},r,{big_r}) increased in r at r = {r}");
        }
        triples += 1;
    }
    Ok(format!("path 2 ({rho_path}), cycle 1 ({rho_cycle}), cap asymmetry {cap_err:.1e}, 50 monotone triples"))
}

fn harnack_on_path() -> Outcome {
    let g = gen(GraphSpec::Path(201));
    let lo = 5.0 / 3.0;
    let mut at_two = 0.0;
    for r in 2..=20 {
        let h = harnack_constant(&g, 100, r as f64).map_err(err)?;
        ensure!(h >= lo - 1e-9 && h <= 3.0 + 1e-6, "H({r}) = {h}");
        if r == 2 {
            at_two = h;
        }
    }
    ensure!((at_two - lo).abs() <= 1e-9, "H(2) = {at_two}");
    Ok(format!("H in [5/3, 3] for R = 2..20, H(2) = {at_two:.12}"))
}

fn vsr_values() -> Outcome {
    let path = gen(GraphSpec::Path(201));
    let mut worst: f64 = 0.0;
    for r in 1..=30 {
        worst = worst.max((vsr_constant(&path, 100, r).map_err(err)? - 0.5).abs());
    }
    ensure!(worst <= 1e-9, "path deviation {worst:e}");
    let grid = gen(GraphSpec::Box2d(41));
    let center = 20 * 41 + 20;
    let vals: Vec<f64> = [2, 4, 8].iter().map(|&r| vsr_constant(&grid, center, r)).collect::<Result<_, _>>().map_err(err)?;
    ensure!(vals[0] > vals[1] && vals[1] > vals[2], "box2d values {vals:?}");
    Ok(format!("path max |v - 1/2| = {worst:.1e}; box2d {:.4} > {:.4} > {:.4}", vals[0], vals[1], vals[2]))
}

fn exponent_fits() -> Outcome {
    let one = InteriorMargin::new(1.0);
    let path = gen(GraphSpec::Path(401));
    let b_path = fit_exponents(&mean_exit_profile(&path, 200, 64, &one).map_err(err)?).map_err(err)?.beta.exponent;
    ensure!((b_path - 2.0).abs() <= 0.02, "path beta {b_path}");
    let sg = gen(GraphSpec::Sg(6));
    let b_sg = fit_exponents(&mean_exit_profile(&sg, 0, 64, &one).map_err(err)?).map_err(err)?.beta.exponent;
    let target = 5f64.ln() / 2f64.ln();
    ensure!((b_sg - target).abs() <= 0.06, "sg(6) beta {b_sg}");
    Ok(format!("path beta {b_path:.4}, sg(6) beta {b_sg:.4} (log2 5 = {target:.4})"))
}

fn monte_carlo() -> Outcome {
    const WALKS: u64 = 100_000;
    let mut worst_z: f64 = 0.0;
    for (name, g, x) in [("path", gen(GraphSpec::Path(401)), 200), ("sg(4)", gen(GraphSpec::Sg(4)), 0)] {
        for r in [2usize, 4, 8] {
            let b = ball(&g, x, r as f64);
            let horizon = (8.0 * mean_exit_time(&g, x, r as f64).map_err(err)?).ceil() as usize;
            let exact = exit_time_cdf(&g, x, &b, horizon).map_err(err)?;
            let seed = RngState::new(0x5eed + r as u64);
            let mc = first_passage_counts(&g, x, WALKS, horizon, seed, &StopRule::ExitSet(b)).map_err(err)?.empirical_cdf();
            for n in 0..=horizon {
                let f = exact.lt(n);
                let band = 4.0 * (f * (1.0 - f) / WALKS as f64).sqrt();
                let dev = (mc[n] - f).abs();
                ensure!(dev <= band + 1e-12, "{name} R = {r}, n = {n}: MC {} vs exact {f}", mc[n]);
                if band > 0.0 {
                    worst_z = worst_z.max(dev / (band / 4.0));
                }
            }
        }
    }
    Ok(format!("all points inside 4 sigma; worst |z| = {worst_z:.2}"))
}

fn exit_time_tails() -> Outcome {
    let start = Instant::now();
    let cfg = VerifyConfig::default();
    let mut lower_c = Vec::new();
    let mut summary = Vec::new();
    for level in [4usize, 5] {
        let g = gen(GraphSpec::Sg(level));
        let desc = GraphDescriptor::of(&g, None);
        let sweep = exit_grid(&g, 0, &[4, 8, 12], &cfg).map_err(err)?;
        let reps = verify_exit_bounds(&g, &desc, 0, &sweep, &cfg).map_err(err)?;
        let (upper, lower) = (&reps.upper, &reps.lower);
        ensure!(upper.verdict == Verdict::Pass, "sg({level}) upper verdict {:?}", upper.verdict);
        ensure!(lower.verdict == Verdict::Pass, "sg({level}) lower verdict {:?}", lower.verdict);
        let c_up = upper.fitted("c").unwrap_or(0.0);
        let (c_lo, big_c) = (lower.fitted("c").unwrap_or(0.0), lower.fitted("C").unwrap_or(-1.0));
        ensure!(c_up > 0.0 && c_lo > 0.0 && big_c > 0.0 && big_c.is_finite(), "sg({level}) constants");
        if level == 5 {
            for r in [4usize, 8, 12] {
                let count = sweep.iter().filter(|s| s.0 == r).count();
                ensure!(count >= 20, "sg(5) R = {r}: only {count} sweep points");
            }
            summary.push(format!("{} rows", sweep.len()));
        }
        summary.push(format!("sg({level}) upper c {c_up:.4}, lower c {c_lo:.4} C {big_c:.4}"));
        lower_c.push(big_c);
    }
    let ratio = lower_c[0].max(lower_c[1]) / lower_c[0].min(lower_c[1]);
    ensure!(ratio <= 2.0, "lower C ratio across levels {ratio}");
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(120), "took {took:?}");
    Ok(format!("{}; level ratio {ratio:.3}; {took:.2?}", summary.join(", ")))
}

fn targets(g: &WeightedGraph, x: usize, ds: &[usize]) -> Vec<usize> {
    ds.iter().map(|&d| *sphere(g, x, d).members().first().unwrap()).collect()
}

fn heat_kernel_lower_bounds() -> Outcome {
    let cfg = VerifyConfig::default();
    let path = gen(GraphSpec::Path(401));
    let pd = GraphDescriptor::of(&path, None);
    let dle = verify_dle(&path, &pd, 200, 2000, &cfg).map_err(err)?;
    let dle_c = dle.fitted("c").unwrap_or(0.0);
    ensure!(dle.verdict == Verdict::Pass && dle_c > 0.0, "DLE verdict {:?}, c {dle_c}", dle.verdict);
    ensure!(dle.rows.len() == 2000, "DLE rows {}", dle.rows.len());

    let mut tsge = Vec::new();
    for (level, ds) in [(4usize, &[2usize, 4, 8][..]), (5, &[2, 4, 8, 16][..])] {
        let g = gen(GraphSpec::Sg(level));
        let desc = GraphDescriptor::of(&g, None);
        let rep = verify_tsge(&g, &desc, 0, &targets(&g, 0, ds), &cfg).map_err(err)?;
        tsge.push(rep);
    }
    let (coarse, fine) = tsge.split_at_mut(1);
    let fine = &mut fine[0];
    ensure!(fine.verdict == Verdict::Pass, "sg(5) tsGE verdict {:?} {:?}", fine.verdict, fine.notes);
    compare_levels(&coarse[0], fine, "C", cfg.stability_factor);
    ensure!(fine.verdict == Verdict::Pass, "sg(5) tsGE C not level-stable: {:?}", fine.fitted("stability_ratio"));

    let ds = [2usize, 4, 8, 12, 16, 20];
    let tle = verify_tle(&path, &pd, 200, &targets(&path, 200, &ds), &cfg).map_err(err)?;
    let d = tle.fitted("D").unwrap_or(f64::INFINITY);
    ensure!(d.is_finite() && d >= 0.0, "tLE D = {d}");
    ensure!(tle.verdict == Verdict::Pass, "tLE verdict {:?}", tle.verdict);
    for row in &tle.rows {
        ensure!(row.lhs >= row.rhs * (1.0 - cfg.tol), "tLE row d = {} n = {} fails", row.get("d"), row.get("n"));
        let (dist, n) = (row.get("d"), row.get("n"));
        ensure!(n >= dist && n <= 4.0 * dist * dist, "tLE row n = {n} outside [d, E(x,2d)] for d = {dist}");
    }
    Ok(format!(
        "DLE c {dle_c:.4}; tsGE C {:.4} (sg4 {:.4}); tLE c {:.4} C {:.4} D {d:.4} over {} rows",
        fine.fitted("C").unwrap(),
        coarse[0].fitted("C").unwrap(),
        tle.fitted("c").unwrap(),
        tle.fitted("C").unwrap(),
        tle.rows.len()
    ))
}

fn comparison_on_path() -> Outcome {
    let g = gen(GraphSpec::Path(401));
    let cache = MeanExitCache::new(&g);
    let samples: Vec<(usize, usize, usize)> =
        [2usize, 4, 8, 16, 32].iter().flat_map(|&r| [(200, 200, r), (200, 200 + r - 1, r), (200, 200 - r + 1, r)]).collect();
    let c = comparison_constants(&cache, &samples).map_err(err)?;
    ensure!((c.c_t - 4.0).abs() <= 1e-9, "C_T = {}", c.c_t);
    ensure!(c.a_t == 2, "A_T = {}", c.a_t);
    ensure!((c.ebar - 1.0).abs() <= 1e-9, "Ebar/E = {}", c.ebar);
    Ok(format!("C_T {}, A_T {}, Ebar/E {}", c.c_t, c.a_t, c.ebar))
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn cli_contract() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_walklab");
    let dir = tempfile::tempdir().map_err(err)?;
    let run = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let s = |p: &Path| p.to_str().unwrap().to_string();

    let report = dir.path().join("r.json");
    let out = run(&["verify", "--theorem", "exit-lower", "--graph", &s(&golden("sg5.edges")), "--x", "0", "--out", &s(&report)]);
    ensure!(out.status.code() == Some(0), "verify exit code {:?}", out.status.code());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).map_err(err)?).map_err(err)?;
    ensure!(json["verdict"] == "pass", "verdict {}", json["verdict"]);

    let csv = dir.path().join("cdf.csv");
    let out = run(&["exit-dist", "--graph", &s(&golden("path201.edges")), "--x", "100", "--R", "4", "--nmax", "200", "--out", &s(&csv)]);
    ensure!(out.status.code() == Some(0), "exit-dist exit code {:?}", out.status.code());
    let text = std::fs::read_to_string(&csv).map_err(err)?;
    ensure!(text.lines().next() == Some("n,P_lt_n"), "header");
    ensure!(text.lines().count() == 201, "{} data rows", text.lines().count() - 1);
    ensure!(text == std::fs::read_to_string(golden("exit_dist_path201.csv")).map_err(err)?, "differs from golden file");

    let bad = dir.path().join("bad.edges");
    std::fs::write(&bad, "0 1 1\n1 2 1\n2 3 -1\n").map_err(err)?;
    let out = run(&["mean-exit", "--graph", &s(&bad), "--x", "1", "--R", "1"]);
    let msg = String::from_utf8_lossy(&out.stderr).to_string();
    ensure!(out.status.code() == Some(1), "malformed file exit code {:?}", out.status.code());
    ensure!(msg.contains("line 3"), "diagnostic `{}`", msg.trim());
    Ok(format!("verify -> 0 / pass; exit-dist -> 200 rows matching golden; malformed -> 1 ({})", msg.trim()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("mean exit time on the path equals R^2", mean_exit_exact),
        ("survival sum equals mean exit time", survival_identity),
        ("Green function identity and symmetry", green_identity),
        ("resistance values, symmetry and monotonicity", resistance_values),
        ("Harnack constants on the path", harnack_on_path),
        ("VSR constants on path and grid", vsr_values),
        ("exponent fits", exponent_fits),
        ("Monte Carlo agrees with exact exit law", monte_carlo),
        ("exit-time tail bounds on sg(5)", exit_time_tails),
        ("heat-kernel lower bounds", heat_kernel_lower_bounds),
        ("comparison constants on the path", comparison_on_path),
        ("command-line contract", cli_contract),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({detail})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

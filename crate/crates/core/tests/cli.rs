//! Golden-file tests for the command-line contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn walklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_walklab")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// `P(T < n)` for the simple walk on Z started at 0 leaving (−R, R), by
/// direct recursion on the offset.
fn ruin_cdf(r: i64, n_max: usize) -> Vec<f64> {
    let width = (2 * r - 1) as usize;
    let mut alive = vec![0.0; width];
    alive[(r - 1) as usize] = 1.0;
    let mut out = vec![0.0; n_max + 1];
    for t in 1..=n_max {
        out[t] = 1.0 - alive.iter().sum::<f64>();
        let mut next = vec![0.0; width];
        for i in 0..width {
            if i > 0 {
                next[i - 1] += alive[i] / 2.0;
            }
            if i + 1 < width {
                next[i + 1] += alive[i] / 2.0;
            }
        }
        alive = next;
    }
    out
}

#[test]
fn generate_matches_golden_edge_files() {
    for (family, size, file) in [("path", "201", "path201.edges"), ("sg", "5", "sg5.edges"), ("sg", "4", "sg4.edges")] {
        let out = walklab(&["generate", "--family", family, "--size", size]);
        assert_eq!(out.status.code(), Some(0));
        let expected = std::fs::read_to_string(golden(file)).unwrap();
        assert_eq!(String::from_utf8(out.stdout).unwrap(), expected, "{file}");
    }
}

#[test]
fn exit_dist_has_200_rows_and_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("cdf.csv");
    let graph = golden("path201.edges");
    let out = walklab(&["exit-dist", "--graph", p(&graph), "--x", "100", "--R", "4", "--nmax", "200", "--out", p(&out_path)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tail mass"));

    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text, std::fs::read_to_string(golden("exit_dist_path201.csv")).unwrap());
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,P_lt_n"));
    let rows: Vec<(usize, f64)> = lines
        .map(|l| {
            let (n, v) = l.split_once(',').unwrap();
            (n.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 200);
    let oracle = ruin_cdf(4, 200);
    for (i, &(n, v)) in rows.iter().enumerate() {
        assert_eq!(n, i + 1);
        assert!((v - oracle[n]).abs() < 1e-12, "n = {n}: {v} vs {}", oracle[n]);
    }
}

#[test]
fn verify_exit_lower_writes_report_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let graph = golden("sg5.edges");
    let out = walklab(&["verify", "--theorem", "exit-lower", "--graph", p(&graph), "--x", "0", "--out", p(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["verdict"], "pass");
    assert_eq!(json["theorem"], "exit-lower");
    assert_eq!(json["graph"]["vertices"], 366);
    assert!(json["fitted"]["C"].as_f64().unwrap() >= 0.0);
    assert!(json["fitted"]["c"].as_f64().unwrap() > 0.0);
    assert!(!json["rows"].as_array().unwrap().is_empty());
}

#[test]
fn verify_with_coarse_level_records_stability() {
    let fine = golden("sg5.edges");
    let coarse = golden("sg4.edges");
    let out = walklab(&["verify", "--theorem", "exit-lower", "--graph", p(&fine), "--x", "0", "--compare", p(&coarse)]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let ratio = json["fitted"]["stability_ratio"].as_f64().unwrap();
    assert!((1.0..=2.0).contains(&ratio));
}

#[test]
fn malformed_line_is_an_input_error_naming_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("bad.edges");
    std::fs::write(&graph, "# comment\n0 1 1\n1 2 oops\n").unwrap();
    let out = walklab(&["heat", "--graph", p(&graph), "--x", "0", "--y", "1", "--n", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(walklab(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(walklab(&["heat", "--bogus"]).status.code(), Some(1));
    assert_eq!(walklab(&["--help"]).status.code(), Some(0));
    let graph = golden("path201.edges");
    // needs a seed
    let out = walklab(&["exit-dist", "--graph", p(&graph), "--x", "100", "--R", "4", "--walks", "10"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn non_interior_requests_need_force() {
    let graph = golden("path201.edges");
    let out = walklab(&["mean-exit", "--graph", p(&graph), "--x", "5", "--R", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncation boundary"));
    let out = walklab(&["mean-exit", "--graph", p(&graph), "--x", "5", "--R", "10", "--force"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 11);
}

#[test]
fn failing_verdict_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("grid.edges");
    let out = walklab(&["generate", "--family", "box2d", "--size", "41", "--out", p(&graph)]);
    assert_eq!(out.status.code(), Some(0));
    let args = ["verify", "--theorem", "vsr", "--graph", p(&graph), "--x", "840", "--format", "json"];
    let out = walklab(&args);
    assert_eq!(out.status.code(), Some(0));
    // the grid's VSR constant decays with r and drops below one half
    let strict: Vec<&str> = args.iter().copied().chain(["--vsr-threshold", "0.5"]).collect();
    let out = walklab(&strict);
    assert_eq!(out.status.code(), Some(2));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["verdict"], "fail");
}

#[test]
fn small_commands_print_expected_values() {
    let graph = golden("path201.edges");
    let g = p(&graph);
    let text = |args: &[&str]| {
        let out = walklab(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let heat = text(&["heat", "--graph", g, "--x", "100", "--y", "100", "--n", "0"]);
    assert_eq!(heat, "n,p_n,p_tilde_n\n0,0.5,0.5\n");
    let rho = text(&["resistance", "--graph", g, "--x", "100", "--r", "1", "--R", "4"]);
    assert_eq!(rho, "x,r,R,rho\n100,1,4,2\n");
    let h = text(&["harnack", "--graph", g, "--x", "100", "--R", "2"]);
    let value: f64 = h.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((value - 5.0 / 3.0).abs() < 1e-9);
    let v = text(&["vsr", "--graph", g, "--x", "100", "--r", "5"]);
    let value: f64 = v.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((value - 0.5).abs() < 1e-9);
    let green = text(&["green", "--graph", g, "--x", "100", "--R", "3", "--format", "json"]);
    let json: serde_json::Value = serde_json::from_str(&green).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 5);
    let scales = text(&["scales", "--graph", g, "--x", "100", "--y", "104", "--n", "30", "--R", "4"]);
    assert!(scales.starts_with("x,y,n,R,k,l,nu,q,Q,C\n100,104,30,4,"));
}

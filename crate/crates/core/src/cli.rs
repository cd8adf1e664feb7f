//! Command-line front end. `run_cli` returns the process exit status:
//! 0 on success or a passing verdict, 2 when a verdict fails, 1 on usage or
//! input errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::{
    ball, generate, read_graph_file, write_edge_list, GenerateOptions, GraphSpec, InteriorMargin, WeightedGraph,
};
use crate::potential::{annulus_resistance, green_function, harnack_constant_within, vsr_constant_within};
use crate::scales::{fit_exponents, k_scale, l_scale, nu_scale, MeanExitCache, ScaleParams};
use crate::stopping::{exit_time_cdf, mean_exit_profile, mean_exit_time};
use crate::verifier::{compare_levels, run_theorem, GraphDescriptor, RunOptions, TheoremId, Verdict, VerifyConfig};
use crate::walk::{first_passage_counts, RngState, StopRule};
use crate::walk::transition_series;

#[derive(Debug, Parser)]
#[command(name = "walklab", version, about = "Exact random-walk quantities and bound checks on weighted graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Common {
    /// Edge-list file.
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// Center or source vertex.
    #[arg(long, global = true)]
    x: Option<usize>,
    /// Second vertex.
    #[arg(long, global = true)]
    y: Option<usize>,
    /// Outer radius.
    #[arg(long = "R", global = true)]
    big_r: Option<f64>,
    /// Inner radius.
    #[arg(long = "r", global = true)]
    r: Option<f64>,
    /// Time.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Time horizon.
    #[arg(long, global = true)]
    nmax: Option<usize>,
    #[arg(long, global = true, default_value_t = 0.25)]
    q: f64,
    #[arg(long = "Q", global = true, default_value_t = 1.0)]
    big_q: f64,
    /// Ball inflation factor in l_C.
    #[arg(long = "C", global = true, default_value_t = 9.0)]
    big_c: f64,
    /// Seed for Monte Carlo runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative slack when re-checking fitted bounds.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Interior-margin factor (overrides each command's default).
    #[arg(long, global = true)]
    margin: Option<f64>,
    /// Compute even when the request reaches the truncation boundary.
    #[arg(long, global = true)]
    force: bool,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Output file (stdout if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a generated graph as an edge list.
    Generate {
        /// path, cycle, box2d, sg, vicsek, star or joined.
        #[arg(long)]
        family: String,
        /// Size or level.
        #[arg(long)]
        size: Option<usize>,
        /// First component of a joined graph, as family:size.
        #[arg(long)]
        left: Option<String>,
        /// Second component of a joined graph, as family:size.
        #[arg(long)]
        right: Option<String>,
        #[arg(long)]
        left_vertex: Option<usize>,
        #[arg(long)]
        right_vertex: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        weight: f64,
    },
    /// Heat kernel p_n(x, y) and p̃_n(x, y).
    Heat,
    /// Exit-time law P(T_{x,R} < n).
    ExitDist {
        /// Also simulate this many walks (needs --seed).
        #[arg(long)]
        walks: Option<u64>,
    },
    /// E(x, R) and Ē(x, R) for R = 1..=R.
    MeanExit,
    /// ρ(x, r, R).
    Resistance,
    /// Green function column g^{B(x,R)}(·, y).
    Green,
    /// Elliptic Harnack constant on B(x, R).
    Harnack,
    /// min over S(x, r) of P_w(τ_x < T_{x,2r}).
    Vsr,
    /// k(x, n, R), l_C(x, y, n, R) and ν(x, n, R).
    Scales,
    /// Exponents β, β′ of R ↦ E(x, R).
    FitBeta,
    /// Run a bound check and write its report.
    Verify {
        /// exit-upper, exit-lower, p1, p2, lptt, lhg, dle, ndle, tsge, tle, cle, vsr or tc.
        #[arg(long)]
        theorem: String,
        /// Coarser level of the same family, for the stability check.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Center on the coarser level (defaults to --x).
        #[arg(long)]
        compare_x: Option<usize>,
        /// Floor for the VSR constant (gate for tsge and ndle).
        #[arg(long)]
        vsr_threshold: Option<f64>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(&cli) {
        Ok(output) => match emit(&cli.opts, &output.text) {
            Ok(()) => output.status,
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

struct Output {
    text: String,
    status: i32,
}

impl Output {
    fn ok(text: String) -> Self {
        Output { text, status: 0 }
    }
}

fn emit(opts: &Common, text: &str) -> Result<()> {
    match &opts.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn need<T: Copy>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidArgument(format!("missing --{flag}")))
}

fn whole(value: f64, flag: &str) -> Result<usize> {
    if value >= 0.0 && value.fract() == 0.0 {
        Ok(value as usize)
    } else {
        Err(Error::InvalidArgument(format!("--{flag} must be a nonnegative integer, got {value}")))
    }
}

impl Common {
    fn load(&self) -> Result<(WeightedGraph, GraphDescriptor)> {
        let path = self.graph.as_ref().ok_or_else(|| Error::InvalidArgument("missing --graph".into()))?;
        let g = read_graph_file(path).map_err(|e| match e {
            Error::Graph(ge) => Error::InvalidArgument(format!("{}: {ge}", path.display())),
            other => other,
        })?;
        let desc = GraphDescriptor::of(&g, Some(path.display().to_string()));
        Ok((g, desc))
    }

    fn params(&self) -> ScaleParams {
        ScaleParams { q: self.q, big_q: self.big_q, c: self.big_c }
    }

    /// Margin for a command whose natural factor is `default`.
    fn margin(&self, default: f64) -> InteriorMargin {
        if self.force {
            InteriorMargin::new(0.0)
        } else {
            InteriorMargin::new(self.margin.unwrap_or(default))
        }
    }

    fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn json_text(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json serializes");
    s.push('\n');
    s
}

/// Shared output for single-row commands.
fn table(fmt: Format, header: &[&str], rows: Vec<Vec<String>>) -> String {
    match fmt {
        Format::Csv => csv(header, rows),
        Format::Json => {
            let objs: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    let map: serde_json::Map<String, serde_json::Value> = header
                        .iter()
                        .zip(row)
                        .map(|(h, v)| {
                            let val = v.parse::<f64>().map(|f| json!(f)).unwrap_or_else(|_| json!(v));
                            (h.to_string(), val)
                        })
                        .collect();
                    serde_json::Value::Object(map)
                })
                .collect();
            json_text(&json!(objs))
        }
    }
}

fn execute(cli: &Cli) -> Result<Output> {
    let o = &cli.opts;
    match &cli.command {
        Command::Generate { family, size, left, right, left_vertex, right_vertex, weight } => {
            let spec = if family == "joined" {
                let parse = |s: &Option<String>, flag: &str| -> Result<GraphSpec> {
                    let text = s.as_ref().ok_or_else(|| Error::InvalidArgument(format!("missing --{flag}")))?;
                    Ok(text.parse::<GraphSpec>()?)
                };
                let (l, r) = (parse(left, "left")?, parse(right, "right")?);
                GraphSpec::Joined {
                    left_vertex: left_vertex.unwrap_or_else(|| l.natural_center()),
                    right_vertex: right_vertex.unwrap_or_else(|| r.natural_center()),
                    left: Box::new(l),
                    right: Box::new(r),
                }
            } else {
                GraphSpec::new(family.parse()?, need(*size, "size")?)?
            };
            let g = generate(&spec, &GenerateOptions { weight: *weight })?;
            Ok(Output::ok(write_edge_list(&g)))
        }
        Command::Heat => {
            let (g, _) = o.load()?;
            let (x, y) = (need(o.x, "x")?, need(o.y, "y")?);
            g.check_vertex(x)?;
            g.check_vertex(y)?;
            let (lo, hi) = match o.n {
                Some(n) => (n, n),
                None => (0, o.nmax.unwrap_or(100)),
            };
            let series = transition_series(&g, x, &[y], hi + 1)?;
            let mu = g.measure(y);
            let rows = (lo..=hi)
                .map(|n| {
                    let p = series[n][0] / mu;
                    let pt = p + series[n + 1][0] / mu;
                    vec![n.to_string(), p.to_string(), pt.to_string()]
                })
                .collect();
            Ok(Output::ok(table(o.format(Format::Csv), &["n", "p_n", "p_tilde_n"], rows)))
        }
        Command::ExitDist { walks } => {
            let (g, _) = o.load()?;
            let x = need(o.x, "x")?;
            let radius = need(o.big_r, "R")?;
            g.check_vertex(x)?;
            o.margin(1.0).require(&g, x, radius)?;
            let region = ball(&g, x, radius);
            let n_max = match o.nmax {
                Some(n) => n,
                None => (8.0 * mean_exit_time(&g, x, radius)?).ceil() as usize,
            };
            if n_max == 0 {
                return Err(Error::InvalidArgument("--nmax must be positive".into()));
            }
            let cdf = exit_time_cdf(&g, x, &region, n_max)?;
            eprintln!("tail mass P(T >= {n_max}) = {}", cdf.tail_mass());
            let mc = match walks {
                Some(w) => {
                    let seed = o.seed.ok_or_else(|| Error::InvalidArgument("--walks needs --seed".into()))?;
                    let counts =
                        first_passage_counts(&g, x, *w, n_max, RngState::new(seed), &StopRule::ExitSet(region.clone()))?;
                    Some(counts.empirical_cdf())
                }
                None => None,
            };
            let mut header = vec!["n", "P_lt_n"];
            if mc.is_some() {
                header.push("P_lt_n_mc");
            }
            let rows = (1..=n_max)
                .map(|n| {
                    let mut row = vec![n.to_string(), cdf.lt(n).to_string()];
                    if let Some(m) = &mc {
                        row.push(m[n].to_string());
                    }
                    row
                })
                .collect();
            Ok(Output::ok(table(o.format(Format::Csv), &header, rows)))
        }
        Command::MeanExit => {
            let (g, _) = o.load()?;
            let x = need(o.x, "x")?;
            let r_max = whole(need(o.big_r, "R")?, "R")?;
            let margin = o.margin(1.0);
            margin.require(&g, x, r_max as f64)?;
            let prof = mean_exit_profile(&g, x, r_max, &margin)?;
            let rows = (1..=r_max)
                .map(|r| vec![r.to_string(), prof.at(r).to_string(), prof.max_mean[r - 1].to_string()])
                .collect();
            Ok(Output::ok(table(o.format(Format::Csv), &["R", "E", "Ebar"], rows)))
        }
        Command::Resistance => {
            let (g, _) = o.load()?;
            let x = need(o.x, "x")?;
            let (r, big_r) = (need(o.r, "r")?, need(o.big_r, "R")?);
            o.margin(1.0).require(&g, x, big_r)?;
            let rho = annulus_resistance(&g, x, r, big_r)?;
            let row = vec![x.to_string(), r.to_string(), big_r.to_string(), rho.to_string()];
            Ok(Output::ok(table(o.format(Format::Csv), &["x", "r", "R", "rho"], vec![row])))
        }
        Command::Green => {
            let (g, _) = o.load()?;
            let x = need(o.x, "x")?;
            let radius = need(o.big_r, "R")?;
            o.margin(1.0).require(&g, x, radius)?;
            let pole = o.y.unwrap_or(x);
            let region = ball(&g, x, radius);
            let col = green_function(&g, &region, pole)?;
            let rows = region.members().iter().map(|&w| vec![w.to_string(), col.at(w).to_string()]).collect();
            Ok(Output::ok(table(o.format(Format::Csv), &["w", "g"], rows)))
        }
        Command::Harnack => {
            let (g, _) = o.load()?;
            let x = need(o.x, "x")?;
            let radius = need(o.big_r, "R")?;
            let h = harnack_constant_within(&g, x, radius, &o.margin(2.0))?;
            let row = vec![x.to_string(), radius.to_string(), h.to_string()];
            Ok(Output::ok(table(o.format(Format::Csv), &["x", "R", "constant"], vec![row])))
        }
        Command::Vsr => {
            let (g, _) = o.load()?;
            let x = need(o.x, "x")?;
            let r = whole(need(o.r, "r")?, "r")?;
            let v = vsr_constant_within(&g, x, r, &o.margin(2.0))?;
            let row = vec![x.to_string(), r.to_string(), v.to_string()];
            Ok(Output::ok(table(o.format(Format::Csv), &["x", "r", "value"], vec![row])))
        }
        Command::Scales => {
            let (g, _) = o.load()?;
            let x = need(o.x, "x")?;
            let n = need(o.n, "n")?;
            let r = whole(need(o.big_r, "R")?, "R")?;
            g.check_vertex(x)?;
            o.margin(2.0).require(&g, x, r as f64)?;
            let params = o.params();
            let cache = MeanExitCache::new(&g);
            let k = k_scale(&cache, x, n as f64, r, &params)?;
            let nu = nu_scale(&cache, x, n as f64, r, &params)?;
            let (y, l) = match o.y {
                Some(y) => (y.to_string(), l_scale(&cache, x, y, n as f64, r, &params)?.to_string()),
                None => (String::new(), String::new()),
            };
            let row = vec![
                x.to_string(),
                y,
                n.to_string(),
                r.to_string(),
                k.to_string(),
                l,
                nu.to_string(),
                params.q.to_string(),
                params.big_q.to_string(),
                params.c.to_string(),
            ];
            let header = ["x", "y", "n", "R", "k", "l", "nu", "q", "Q", "C"];
            Ok(Output::ok(table(o.format(Format::Csv), &header, vec![row])))
        }
        Command::FitBeta => {
            let (g, _) = o.load()?;
            let x = need(o.x, "x")?;
            g.check_vertex(x)?;
            let margin = o.margin(1.0);
            let r_max = match o.big_r {
                Some(r) => {
                    let r = whole(r, "R")?;
                    margin.require(&g, x, r as f64)?;
                    r
                }
                None => {
                    let mut r = 1;
                    while r < 64
                        && margin.is_valid(&g, x, (r + 1) as f64)
                        && ball(&g, x, (r + 1) as f64).len() < g.vertex_count()
                    {
                        r += 1;
                    }
                    r
                }
            };
            let fits = fit_exponents(&mean_exit_profile(&g, x, r_max, &margin)?)?;
            let text = match o.format(Format::Csv) {
                Format::Json => json_text(&serde_json::to_value(&fits).expect("fits serialize")),
                Format::Csv => {
                    let header = [
                        "beta",
                        "beta_intercept",
                        "beta_residual",
                        "beta_r_min",
                        "beta_r_max",
                        "beta_prime",
                        "lower_constant",
                        "upper_constant",
                    ];
                    let b = &fits.beta;
                    let row = vec![
                        b.exponent.to_string(),
                        b.intercept.to_string(),
                        b.max_rel_residual.to_string(),
                        b.r_range.0.to_string(),
                        b.r_range.1.to_string(),
                        fits.beta_prime.exponent.to_string(),
                        fits.lower_constant.to_string(),
                        fits.upper_constant.to_string(),
                    ];
                    csv(&header, vec![row])
                }
            };
            Ok(Output::ok(text))
        }
        Command::Verify { theorem, compare, compare_x, vsr_threshold } => {
            let id: TheoremId = theorem.parse()?;
            let (g, desc) = o.load()?;
            let x = need(o.x, "x")?;
            let cfg = VerifyConfig {
                params: o.params(),
                margin: if o.force { Some(0.0) } else { o.margin },
                tol: o.tol.unwrap_or(VerifyConfig::default().tol),
                seed: o.seed,
                vsr_threshold: vsr_threshold.unwrap_or(VerifyConfig::default().vsr_threshold),
                ..VerifyConfig::default()
            };
            let run = RunOptions {
                y: o.y,
                radius: o.big_r.map(|r| whole(r, "R")).transpose()?,
                n: o.n,
            };
            let mut report = run_theorem(id, &g, &desc, x, &run, &cfg)?;
            if let Some(path) = compare {
                let coarse_g = read_graph_file(path)?;
                let coarse_desc = GraphDescriptor::of(&coarse_g, Some(path.display().to_string()));
                let cx = compare_x.unwrap_or(x);
                let coarse = run_theorem(id, &coarse_g, &coarse_desc, cx, &run, &cfg)?;
                let key = if report.fitted("C").is_some() { "C" } else { "c" };
                compare_levels(&coarse, &mut report, key, cfg.stability_factor);
            }
            let status = if report.verdict == Verdict::Pass { 0 } else { 2 };
            let text = match o.format(Format::Json) {
                Format::Json => {
                    let mut s = report.to_json();
                    s.push('\n');
                    s
                }
                Format::Csv => report_csv(&report),
            };
            Ok(Output { text, status })
        }
    }
}

/// Sweep rows as CSV; keys first, then `lhs,rhs,log_margin`.
fn report_csv(report: &crate::verifier::VerificationReport) -> String {
    let keys: Vec<String> = report.rows.first().map(|r| r.key.keys().cloned().collect()).unwrap_or_default();
    let mut out = String::new();
    for k in &keys {
        let _ = write!(out, "{k},");
    }
    out.push_str("lhs,rhs,log_margin\n");
    for row in &report.rows {
        for k in &keys {
            let _ = write!(out, "{},", row.get(k));
        }
        let _ = writeln!(out, "{},{},{}", row.lhs, row.rhs, row.log_margin);
    }
    out
}

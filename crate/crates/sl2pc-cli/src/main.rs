use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use sl2pc::cohomology::{expected_betti, CeEngine, CohomologyConfig, RankMethod};
use sl2pc::flow::{flow_closed, mat_dist, retract};
use sl2pc::sampling::{point_in_ball, rng};
use sl2pc::sl2::{skeleton_gap, Sl2Point};
use sl2pc_cli::config::Config;
use sl2pc_cli::suites::{run_suites, ALL, SUITES};

#[derive(Parser)]
#[command(name = "sl2pc", version, about = "Verification suites for the linear Poisson structure of sl2(C)")]
struct Cli {
    /// TOML configuration file; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Machine-readable output (JSON lines).
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Multiplies every tolerance.
    #[arg(long, global = true)]
    tol_scale: Option<f64>,
    /// Polynomial degree bound for the cohomology table.
    #[arg(long, global = true)]
    max_degree: Option<u32>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Add per-check wall-clock times to report records.
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a verification suite: core, exterior, flow, skeleton, homotopy, flat or all.
    Verify {
        suite: String,
        /// Also write the JSON-lines report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Betti numbers of the formal Poisson cohomology next to the expected table.
    Cohomology {
        /// Comma-separated multivector degrees (default 0..6).
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
    },
    /// The normalizing flow from a point: 6 comma-separated reals, diag,
    /// nilpotent or random:SEED.
    Flow {
        point: String,
        /// Comma-separated times.
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,5")]
        t: Vec<f64>,
    },
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn load_config(cli: &Cli) -> Result<Config, String> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p).map_err(|e| e.to_string())?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.tol_scale {
        cfg.tol_scale = t;
    }
    if let Some(d) = cli.max_degree {
        cfg.core.max_degree = d;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            return config_error("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is built once");
    }
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    match &cli.cmd {
        Cmd::Verify { suite, report } => verify(&cli, &cfg, suite, report.as_ref()),
        Cmd::Cohomology { k } => cohomology(&cli, &cfg, k),
        Cmd::Flow { point, t } => flow(&cli, point, t),
    }
}

fn verify(cli: &Cli, cfg: &Config, suite: &str, path: Option<&PathBuf>) -> ExitCode {
    let suites: Vec<&str> = match suite {
        "all" => ALL.to_vec(),
        s if SUITES.contains(&s) => vec![s],
        s => return config_error(format!("unknown suite {s:?}; expected one of {SUITES:?} or all")),
    };
    let rep = run_suites(&suites, cfg, cli.timings);
    let lines = rep.to_json_lines();
    if let Some(p) = path {
        if let Err(e) = std::fs::write(p, &lines) {
            eprintln!("error: {}: {e}", p.display());
            return ExitCode::from(2);
        }
    }
    if cli.json {
        print!("{lines}");
    } else {
        print!("{}", rep.to_text());
    }
    if rep.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

#[derive(Serialize)]
struct CohomologyRow {
    k: usize,
    degrees: Vec<u32>,
    computed: Vec<usize>,
    expected: Vec<usize>,
}

fn cohomology(cli: &Cli, cfg: &Config, k: &[usize]) -> ExitCode {
    let ks: Vec<usize> = if k.is_empty() { (0..=6).collect() } else { k.to_vec() };
    if let Some(bad) = ks.iter().find(|&&x| x > 6) {
        return config_error(format!("multivector degree {bad} exceeds 6"));
    }
    let degrees: Vec<u32> = (0..=cfg.core.max_degree).collect();
    let engine = match CeEngine::new(CohomologyConfig { degree_cap: cfg.core.degree_cap, escalate: true }) {
        Ok(e) => e,
        Err(e) => return config_error(e),
    };
    let table = match engine.betti_table(&degrees, &ks, RankMethod::Modular) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let rows: Vec<CohomologyRow> = ks
        .iter()
        .zip(&table.rows)
        .map(|(&k, row)| CohomologyRow {
            k,
            degrees: degrees.clone(),
            computed: row.clone(),
            expected: degrees.iter().map(|&d| expected_betti(k, d)).collect(),
        })
        .collect();
    let equal = rows.iter().all(|r| r.computed == r.expected);
    if cli.json {
        for r in &rows {
            println!("{}", serde_json::to_string(r).expect("row serializes"));
        }
        println!("{}", serde_json::json!({ "summary": true, "equal": equal }));
    } else {
        let head: String = degrees.iter().map(|d| format!("{d:>4}")).collect();
        println!("computed        | expected");
        println!("  k\\d {head} |{head}");
        for r in &rows {
            let c: String = r.computed.iter().map(|v| format!("{v:>4}")).collect();
            let e: String = r.expected.iter().map(|v| format!("{v:>4}")).collect();
            println!("  {:<4}{c} |{e}", r.k);
        }
        println!("{}", if equal { "tables agree" } else { "tables differ" });
    }
    if equal {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn parse_point(spec: &str) -> Result<Sl2Point, String> {
    match spec {
        "diag" => return Ok(Sl2Point::new([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])),
        // A = [[0, 1], [0, 0]]
        "nilpotent" => return Ok(Sl2Point::new([0.0, 0.0, -0.5, 0.0, 0.0, -0.5])),
        _ => {}
    }
    if let Some(seed) = spec.strip_prefix("random:") {
        let seed: u64 = seed.parse().map_err(|_| format!("bad seed in {spec:?}"))?;
        return Ok(point_in_ball(&mut rng(seed), 2.0));
    }
    let vals: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad coordinate {s:?}")))
        .collect::<Result<_, _>>()?;
    let coords: [f64; 6] = vals.try_into().map_err(|v: Vec<f64>| format!("expected 6 coordinates, got {}", v.len()))?;
    if coords.iter().any(|c| !c.is_finite()) {
        return Err("coordinates must be finite".into());
    }
    Ok(Sl2Point::new(coords))
}

#[derive(Serialize)]
struct FlowRow {
    t: f64,
    a_t: [f64; 6],
    r2_t: f64,
    gap: f64,
    dist_to_retract: f64,
}

fn flow(cli: &Cli, spec: &str, ts: &[f64]) -> ExitCode {
    let p = match parse_point(spec) {
        Ok(p) => p,
        Err(e) => return config_error(e),
    };
    if let Some(t) = ts.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return config_error(format!("flow times must be non-negative, got {t}"));
    }
    let r = retract(&p);
    let rows: Vec<FlowRow> = ts
        .iter()
        .map(|&t| {
            let s = flow_closed(&p, t);
            FlowRow { t, a_t: s.a_t.coords, r2_t: s.r2_t, gap: skeleton_gap(&s.a_t), dist_to_retract: mat_dist(&s.a_t, &r) }
        })
        .collect();
    if cli.json {
        for row in &rows {
            println!("{}", serde_json::to_string(row).expect("row serializes"));
        }
    } else {
        println!("A = {:?}, R^2 = {}, f = {}", p.coords, p.r2(), p.casimir());
        println!("{:>8}  {:>14}  {:>12}  {:>12}  A_t", "t", "R_t^2", "gap", "|A_t - r(A)|");
        for row in &rows {
            let a: Vec<String> = row.a_t.iter().map(|v| format!("{v:.6}")).collect();
            println!("{:>8}  {:>14.10}  {:>12.3e}  {:>12.3e}  [{}]", row.t, row.r2_t, row.gap, row.dist_to_retract, a.join(", "));
        }
    }
    ExitCode::SUCCESS
}

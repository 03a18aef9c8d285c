//! Experiment runner: every suite of the library as a subcommand with a
//! reproducible seed and machine-readable JSON/CSV artifacts.
//!
//! Exit status: 0 when every assertion of the invoked suite passes, 1 on
//! assertion failure, 2 on configuration errors.

use chamberlab::suites;
use clap::{Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "chamberlab", version, about = "numerical suites for barycenters, chamber bundles and boundary dynamics")]
struct Cli {
    /// Seed for all randomized inputs; artifacts are byte-identical per
    /// (version, config, seed).
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Write the JSON report here (CSV artifacts go next to it).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override tolerance scaling where a suite accepts it (reserved).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// key=value file mirroring the flags (unknown keys are rejected).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Appendix-bound suite: Q-identity, positivity, transport certificate,
    /// containment and equivariance.
    BarycenterSuite {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
    },
    /// Derivative oracles against re-solve finite differences.
    DerivativeSuite {
        #[arg(long, default_value_t = 500)]
        instances: usize,
    },
    /// Iwasawa / generalized Iwasawa / Cartan reconstructions and block
    /// shapes.
    IwasawaSuite {
        #[arg(long, default_value_t = 10000)]
        instances: usize,
    },
    /// Chamber bundle: trivialization round-trip, flow invariance,
    /// retraction non-expansion, leaf membership.
    ChamberSuite {
        #[arg(long, default_value_t = 10000)]
        pairs: usize,
    },
    /// Expansion certificate search plus uniqueness and upgrade probes.
    Expansion {
        #[arg(long, default_value_t = 1.1)]
        lambda: f64,
        #[arg(long, default_value_t = 6)]
        word_cap: usize,
    },
    /// Denjoy blow-up: relations, collapsing map, invariant family.
    Denjoy {
        #[arg(long, default_value_t = 11000)]
        depth: i64,
        #[arg(long, default_value_t = 10000)]
        iterates: usize,
    },
    /// Cocycle identity and the chamber deformation.
    RhoAlpha {
        #[arg(long, default_value_t = 1000)]
        triples: usize,
    },
    /// Iterated chamber contraction traces.
    CollapseWitness {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 50)]
        iterations: usize,
    },
    /// Equivariant suspension map over the genus-2 lattice.
    FTilde {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// BiLipschitz flats and shadowing fits.
    Quasiflat {
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long, default_value_t = 10.0)]
        window: f64,
    },
    /// Coarse intersections of flats sharing a singular geodesic.
    CoarseIntersect,
}

fn parse_config(path: &PathBuf) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("config: {e}"))?;
    let mut map = BTreeMap::new();
    let known = [
        "seed", "out", "tol", "instances", "pairs", "lambda", "word_cap", "depth", "iterates",
        "triples", "alpha", "iterations", "samples", "grid", "window",
    ];
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", ln + 1))?;
        let k = k.trim();
        if !known.contains(&k) {
            return Err(format!("config line {}: unknown key `{k}`", ln + 1));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut seed = cli.seed;
    let mut out = cli.out.clone();
    let mut overrides: BTreeMap<String, String> = BTreeMap::new();
    if let Some(path) = &cli.config {
        match parse_config(path) {
            Ok(map) => {
                if let Some(s) = map.get("seed") {
                    match s.parse() {
                        Ok(v) => seed = v,
                        Err(_) => {
                            eprintln!("config: bad seed `{s}`");
                            return ExitCode::from(2);
                        }
                    }
                }
                if let Some(o) = map.get("out") {
                    out = Some(PathBuf::from(o));
                }
                overrides = map;
            }
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
        }
    }
    let get_usize = |overrides: &BTreeMap<String, String>, key: &str, default: usize| -> usize {
        overrides.get(key).and_then(|v| v.parse().ok()).unwrap_or(default)
    };
    let get_f64 = |overrides: &BTreeMap<String, String>, key: &str, default: f64| -> f64 {
        overrides.get(key).and_then(|v| v.parse().ok()).unwrap_or(default)
    };

    let report = match &cli.command {
        Command::BarycenterSuite { instances } => {
            suites::barycenter_suite(seed, get_usize(&overrides, "instances", *instances))
        }
        Command::DerivativeSuite { instances } => {
            suites::derivative_suite(seed, get_usize(&overrides, "instances", *instances))
        }
        Command::IwasawaSuite { instances } => {
            suites::iwasawa_suite(seed, get_usize(&overrides, "instances", *instances))
        }
        Command::ChamberSuite { pairs } => {
            suites::chamber_suite(seed, get_usize(&overrides, "pairs", *pairs))
        }
        Command::Expansion { lambda, word_cap } => suites::expansion_suite(
            seed,
            get_f64(&overrides, "lambda", *lambda),
            get_usize(&overrides, "word_cap", *word_cap),
        ),
        Command::Denjoy { depth, iterates } => suites::denjoy_suite(
            seed,
            overrides.get("depth").and_then(|v| v.parse().ok()).unwrap_or(*depth),
            get_usize(&overrides, "iterates", *iterates),
        ),
        Command::RhoAlpha { triples } => {
            suites::rho_alpha_suite(seed, get_usize(&overrides, "triples", *triples))
        }
        Command::CollapseWitness { alpha, iterations } => suites::collapse_witness_suite(
            seed,
            get_f64(&overrides, "alpha", *alpha),
            get_usize(&overrides, "iterations", *iterations),
        ),
        Command::FTilde { samples } => {
            suites::f_tilde_suite(seed, get_usize(&overrides, "samples", *samples))
        }
        Command::Quasiflat { grid, window } => suites::quasiflat_suite(
            seed,
            get_usize(&overrides, "grid", *grid),
            get_f64(&overrides, "window", *window),
        ),
        Command::CoarseIntersect => suites::coarse_intersect_suite(seed),
    };

    for line in report.summary_lines() {
        println!("{line}");
    }
    println!(
        "{}: {} assertions, {}",
        report.suite,
        report.assertions.len(),
        if report.all_passed() { "all passed" } else { "FAILURES" }
    );

    if let Some(path) = &out {
        let json = serde_json::to_string_pretty(&report).expect("serialize report");
        if let Err(e) = std::fs::write(path, json + "\n") {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
        let stem = path.with_extension("");
        for (name, header, rows) in &report.artifacts {
            let csv_path = PathBuf::from(format!("{}_{name}.csv", stem.display()));
            let mut body = String::with_capacity(rows.len() * 32 + header.len() + 1);
            body.push_str(header);
            body.push('\n');
            for row in rows {
                body.push_str(row);
                body.push('\n');
            }
            if let Err(e) = std::fs::write(&csv_path, body) {
                eprintln!("cannot write {}: {e}", csv_path.display());
                return ExitCode::from(2);
            }
        }
    }

    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

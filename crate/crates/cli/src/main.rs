//! Command-line driver: model validation, single checks, suites and report summaries.
//!
//! Exit status: 0 when every check passes, 1 when any check fails, 2 on configuration errors.

mod checks;
mod config;
mod model;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use wavecert::{CheckReport, Error, Result};

use checks::{Context, CHECKS};
use config::{CheckSpec, ModelSource, RunConfig, CONFIG_VERSION};

#[derive(Parser)]
#[command(name = "wavecert", version, about = "Numerical checks of heat-kernel, wave and Riesz-transform estimates on finite metric measure spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Model files and builtins
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
    /// A single check
    Check {
        #[command(subcommand)]
        action: CheckAction,
    },
    /// A configured list of checks
    Suite {
        #[command(subcommand)]
        action: SuiteAction,
    },
    /// Reports already written to a directory
    Report {
        #[command(subcommand)]
        action: ReportAction,
    },
}

#[derive(Subcommand)]
enum ModelAction {
    /// Assemble a model and print its summary
    Validate {
        /// builtin such as cycle:64, or a path to a .toml model file
        model: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunFlags {
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// multiplies the threshold of checks whose verdict is observed <= threshold
    #[arg(long)]
    tolerance_scale: Option<f64>,
}

#[derive(Subcommand)]
enum CheckAction {
    /// Run one check on one model
    Run {
        name: String,
        /// builtin such as cycle:64, or a path to a .toml model file
        #[arg(long)]
        model: String,
        /// parameter override, key=value with a TOML value
        #[arg(long = "param")]
        params: Vec<String>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// List check names
    List,
}

#[derive(Subcommand)]
enum SuiteAction {
    /// Run every check listed in a config file
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
}

#[derive(Subcommand)]
enum ReportAction {
    /// Print the verdicts of the JSON reports in a directory
    Summarize { dir: PathBuf },
}

/// Failure kinds mapped to exit codes.
enum Failure {
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn model_source(spec: &str) -> ModelSource {
    if spec.ends_with(".toml") || spec.contains('/') {
        ModelSource { builtin: None, file: Some(PathBuf::from(spec)) }
    } else {
        ModelSource { builtin: Some(spec.to_string()), file: None }
    }
}

fn parse_param(kv: &str) -> std::result::Result<(String, toml::Value), Failure> {
    let (k, v) = kv
        .split_once('=')
        .ok_or_else(|| Failure::Config(format!("parameter `{kv}` is not key=value")))?;
    let doc: toml::Table = toml::from_str(&format!("v = {v}"))
        .or_else(|_| toml::from_str(&format!("v = {:?}", v)))
        .map_err(|e: toml::de::Error| Failure::Config(format!("parameter `{kv}`: {e}")))?;
    Ok((k.trim().to_string(), doc["v"].clone()))
}

fn validate_model(spec: &str, seed: u64) -> std::result::Result<(), Failure> {
    let m = model_source(spec).resolve(seed, Path::new("."))?;
    let s = &m.space;
    let prof = s.doubling_profile(&s.default_radii())?;
    println!("model       {}", m.name);
    println!("points      {}", s.n());
    println!("edges       {}", s.edges().len());
    println!("measure     {}", s.total_measure());
    println!("diameter    {}", s.diameter());
    println!("doubling    C = {} D = {}", prof.c_doubling, prof.d_exponent);
    println!("magnetic    {}", m.magnetic.is_some());
    println!("triangles   {}", m.hodge.as_ref().map_or(0, |h| h.triangles.len()));
    m.operator()?.decompose()?;
    println!("operator    ok");
    Ok(())
}

struct Outcome {
    name: String,
    report: CheckReport,
    resolved: toml::Table,
}

fn run_config(mut cfg: RunConfig, base: &Path, flags: RunFlags) -> std::result::Result<bool, Failure> {
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(t) = flags.tolerance_scale {
        cfg.tolerance_scale = t;
    }
    if let Some(j) = flags.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(o) = flags.out {
        cfg.out = Some(o);
    }
    if cfg.tolerance_scale.is_nan() || cfg.tolerance_scale <= 0.0 {
        return Err(Failure::Config("tolerance_scale must be positive".into()));
    }
    if cfg.checks.is_empty() {
        return Err(Failure::Config("no checks selected".into()));
    }
    let mut seen = BTreeSet::new();
    for c in &cfg.checks {
        if !CHECKS.contains(&c.name.as_str()) {
            return Err(Failure::Config(format!("unknown check `{}`; valid checks are {}", c.name, CHECKS.join(", "))));
        }
        if !seen.insert(c.name.clone()) {
            return Err(Failure::Config(format!("check `{}` is listed twice", c.name)));
        }
    }
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("wavecert-out"));
    let model = cfg.model.resolve(cfg.seed, base)?;
    let ctx = Context { seed: cfg.seed, tolerance_scale: cfg.tolerance_scale };
    let started = Instant::now();
    let wall = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let results: Vec<Result<Outcome>> = pool.install(|| {
        cfg.checks
            .par_iter()
            .map(|c| {
                let (report, resolved) = checks::run(&c.name, &model, &c.params, &ctx)?;
                Ok(Outcome { name: c.name.clone(), report, resolved })
            })
            .collect()
    });
    let mut outcomes = Vec::new();
    for (c, r) in cfg.checks.iter().zip(results) {
        outcomes.push(r.map_err(|e| Failure::Config(format!("check `{}`: {e}", c.name)))?);
    }

    fs::create_dir_all(&out).map_err(|e| Failure::Config(format!("cannot create {}: {e}", out.display())))?;
    let io = |e: std::io::Error| Failure::Config(e.to_string());
    let mut resolved_cfg = cfg.clone();
    resolved_cfg.out = Some(out.clone());
    resolved_cfg.checks = outcomes.iter().map(|o| CheckSpec { name: o.name.clone(), params: o.resolved.clone() }).collect();
    fs::write(out.join("config.resolved.toml"), resolved_cfg.to_toml()).map_err(io)?;

    let mut runtimes = BTreeMap::new();
    let mut summary = csv::Writer::from_path(out.join("summary.csv")).map_err(|e| Failure::Config(e.to_string()))?;
    summary
        .write_record(["check", "pass", "observed_constant", "threshold"])
        .map_err(|e| Failure::Config(e.to_string()))?;
    let mut all_pass = true;
    for o in &mut outcomes {
        runtimes.insert(o.name.clone(), o.report.runtime_ms);
        o.report.runtime_ms = None;
        fs::write(out.join(format!("{}.json", o.name)), o.report.to_json() + "\n").map_err(io)?;
        if !o.report.table.is_empty() {
            fs::write(out.join(format!("{}.csv", o.name)), o.report.table.to_csv()).map_err(io)?;
        }
        summary
            .write_record([
                o.name.clone(),
                o.report.pass.to_string(),
                format!("{:e}", o.report.observed_constant),
                format!("{:e}", o.report.threshold),
            ])
            .map_err(|e| Failure::Config(e.to_string()))?;
        println!(
            "{} {} observed {:e} threshold {:e}",
            if o.report.pass { "PASS" } else { "FAIL" },
            o.name,
            o.report.observed_constant,
            o.report.threshold
        );
        all_pass &= o.report.pass;
    }
    summary.flush().map_err(io)?;
    let meta = serde_json::json!({
        "wavecert_version": env!("CARGO_PKG_VERSION"),
        "started_unix": wall,
        "total_ms": started.elapsed().as_millis() as u64,
        "runtime_ms": runtimes,
        "jobs": cfg.jobs,
    });
    fs::write(out.join("metadata.json"), serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n").map_err(io)?;
    Ok(all_pass)
}

fn summarize(dir: &Path) -> std::result::Result<bool, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::Config(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "metadata.json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Config(format!("no reports in {}", dir.display())));
    }
    let mut all = true;
    for p in paths {
        let text = fs::read_to_string(&p).map_err(|e| Failure::Config(e.to_string()))?;
        let r: CheckReport =
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
        println!(
            "{} {} observed {:e} threshold {:e}",
            if r.pass { "PASS" } else { "FAIL" },
            r.check_name,
            r.observed_constant,
            r.threshold
        );
        all &= r.pass;
    }
    Ok(all)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Model { action: ModelAction::Validate { model, seed } } => validate_model(&model, seed).map(|_| true),
        Command::Check { action: CheckAction::List } => {
            for c in CHECKS {
                println!("{c}");
            }
            Ok(true)
        }
        Command::Check { action: CheckAction::Run { name, model, params, flags } } => (|| {
            let mut table = toml::Table::new();
            for kv in &params {
                let (k, v) = parse_param(kv)?;
                table.insert(k, v);
            }
            let cfg = RunConfig {
                version: CONFIG_VERSION,
                seed: 0,
                out: None,
                tolerance_scale: 1.0,
                jobs: None,
                model: model_source(&model),
                checks: vec![CheckSpec { name, params: table }],
            };
            run_config(cfg, Path::new("."), flags)
        })(),
        Command::Suite { action: SuiteAction::Run { config, flags } } => (|| {
            let cfg = RunConfig::load(&config)?;
            let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
            run_config(cfg, &base, flags)
        })(),
        Command::Report { action: ReportAction::Summarize { dir } } => summarize(&dir),
    };
    match result {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

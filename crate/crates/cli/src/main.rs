//! `emmfit {gen|fit|eval|bench}`: synthetic data, fitting, evaluation and
//! benchmark sweeps for elliptical mixture models.
//!
//! Exit status is 0 when every run succeeded, 1 when a fit or benchmark run
//! failed (outputs are still written) and 2 for invalid input.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use emmfit_core::bench::{run_suite, BenchSuite};
use emmfit_core::elliptical::parse_family_kind;
use emmfit_core::io::{model_from_json, model_to_json, read_samples_csv, to_json_string, write_samples_csv};
use emmfit_core::mixture::{generate_synthetic, MixtureModel, SyntheticSpec};
use emmfit_core::optim::{fit, initialize, InitStrategy, Method, OptimizerConfig, Schedule};
use emmfit_core::transport::{d_u_weighted, mc_mixture_w2, w2_elliptical, Reference, ScatterWeight};
use emmfit_core::{rng, EllipticalFamily, FamilyKind};
use serde_json::{json, Value};

/// Traces longer than this are downsampled unless `--trace-every` is given.
const FULL_TRACE_LIMIT: usize = 10_000;
const THREADS_VAR: &str = "EMMFIT_THREADS";

#[derive(Parser)]
#[command(name = "emmfit", version, about = "Elliptical mixture model fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a separated Gaussian mixture dataset and its ground truth.
    Gen(GenArgs),
    /// Fit a mixture to a dataset.
    Fit(FitArgs),
    /// Evaluate a model against data, another model, or a benchmark aggregate.
    Eval(EvalArgs),
    /// Run a benchmark suite.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 10.0)]
    ecc: f64,
    #[arg(long, default_value_t = 10.0)]
    sep: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset CSV.
    #[arg(long, default_value = "data.csv")]
    out: PathBuf,
    /// Ground-truth model JSON; defaults to the dataset path with `.truth.json`.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Dataset CSV (headerless, comma-separated).
    data: Option<PathBuf>,
    /// Family name followed by `key=value` parameters, e.g. `kotz a=1 b=0.5 s=1`.
    #[arg(long, num_args = 1..)]
    family: Vec<String>,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "dadam")]
    opt: Method,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "random")]
    init: InitStrategy,
    /// Base optimiser settings as JSON; command-line flags override them.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Projections averaged per iteration.
    #[arg(long)]
    batch: Option<usize>,
    /// Element-wise adaptive location steps for dadam.
    #[arg(long)]
    adaptive_locations: bool,
    /// Record the NLL every N iterations.
    #[arg(long)]
    nll_every: Option<usize>,
    /// Record the evaluation cost every N iterations.
    #[arg(long)]
    eval_every: Option<usize>,
    /// Keep every N-th trace row.
    #[arg(long)]
    trace_every: Option<usize>,
    #[arg(long, default_value = "model.json")]
    out_model: PathBuf,
    #[arg(long, default_value = "report.json")]
    out_report: PathBuf,
    #[arg(long, default_value = "trace.csv")]
    out_trace: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Model JSON; give twice to compare two models.
    #[arg(long, num_args = 1)]
    model: Vec<PathBuf>,
    /// Dataset CSV for model-vs-data evaluation.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Benchmark aggregate JSON to summarise.
    #[arg(long, conflicts_with_all = ["model", "data"])]
    bench: Option<PathBuf>,
    /// Draws per side for the empirical Wasserstein distance; defaults to min(n, 10000).
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite JSON; the default suite when absent.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Overrides the suite's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "bench-out")]
    out_dir: PathBuf,
    /// Keep every N-th trace row.
    #[arg(long)]
    trace_every: Option<usize>,
    /// Skip writing per-run traces.
    #[arg(long)]
    no_traces: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn cmd_gen(a: GenArgs) -> Result<bool> {
    let spec = SyntheticSpec { m: a.m, k: a.k, n: a.n, eccentricity: a.ecc, separation: a.sep };
    let data = generate_synthetic(&spec, &mut rng::from_seed(a.seed), a.seed)?;
    let truth_path = a.truth.unwrap_or_else(|| a.out.with_extension("truth.json"));
    write_samples_csv(create(&a.out)?, &data.samples)?;
    let truth = data.truth.as_ref().context("generator returned no ground truth")?;
    fs::write(&truth_path, model_to_json(truth)?).with_context(|| format!("writing {}", truth_path.display()))?;
    println!("seed {}", a.seed);
    Ok(true)
}

/// Splits `--family` tokens into the family string and any trailing
/// positional arguments swallowed by the flag.
fn split_family(tokens: &[String]) -> (String, Vec<String>) {
    let Some((head, rest)) = tokens.split_first() else {
        return (FamilyKind::gaussian().to_string(), Vec::new());
    };
    let cut = rest.iter().position(|t| !t.contains('=')).unwrap_or(rest.len());
    let spec = std::iter::once(head).chain(&rest[..cut]).cloned().collect::<Vec<_>>().join(" ");
    (spec, rest[cut..].to_vec())
}

fn cmd_fit(a: FitArgs) -> Result<bool> {
    let (spec, extra) = split_family(&a.family);
    let data_path = match (a.data, extra.as_slice()) {
        (Some(p), []) => p,
        (None, [p]) => PathBuf::from(p),
        (None, []) => bail!("a dataset path is required"),
        _ => bail!("unexpected arguments after --family: {}", extra.join(" ")),
    };
    let kind = parse_family_kind(&spec).with_context(|| format!("family `{spec}`"))?;
    let samples = read_samples_csv(open(&data_path)?).with_context(|| format!("reading {}", data_path.display()))?;
    let family = EllipticalFamily::new(kind, samples.ncols())?;

    let mut cfg = match &a.config {
        Some(p) => serde_json::from_reader(open(p)?).with_context(|| format!("reading {}", p.display()))?,
        None => OptimizerConfig::default(),
    };
    cfg.method = a.opt;
    cfg.seed = a.seed;
    if let Some(lr) = a.lr {
        cfg.lr = Schedule::Constant(lr);
    }
    if let Some(h) = a.iters {
        cfg.max_iters = h;
    }
    if let Some(b) = a.batch {
        cfg.batch = b;
    }
    if let Some(v) = a.nll_every {
        cfg.nll_every = v;
    }
    if let Some(v) = a.eval_every {
        cfg.eval_every = v;
    }
    cfg.adaptive_locations |= a.adaptive_locations;
    cfg.validate()?;

    let mut r = rng::from_seed(a.seed);
    let model0 = initialize(&samples, a.k, family, a.init, &mut r)?;
    let report = fit(&model0, &samples, &cfg, &mut r)?;

    fs::write(&a.out_model, model_to_json(&report.model)?)
        .with_context(|| format!("writing {}", a.out_model.display()))?;
    fs::write(&a.out_report, to_json_string(&report)?)
        .with_context(|| format!("writing {}", a.out_report.display()))?;
    let every = a.trace_every.unwrap_or_else(|| default_trace_every(cfg.max_iters));
    report.write_trace_csv(create(&a.out_trace)?, every)?;
    if let Some(reason) = &report.failure {
        eprintln!("fit failed: {reason}");
    }
    Ok(!report.failed)
}

fn default_trace_every(iters: usize) -> usize {
    iters.div_ceil(FULL_TRACE_LIMIT).max(1)
}

fn cmd_eval(a: EvalArgs) -> Result<bool> {
    let value = if let Some(path) = &a.bench {
        summarize_aggregate(&serde_json::from_reader(open(path)?)?)?
    } else {
        match (a.model.as_slice(), &a.data) {
            ([m], Some(d)) => eval_against_data(&load_model(m)?, d, a.draws, a.seed)?,
            ([m1, m2], None) => eval_models(&load_model(m1)?, &load_model(m2)?)?,
            _ => bail!("give --model with --data, two --model files, or --bench"),
        }
    };
    let text = to_json_string(&value)?;
    match &a.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(true)
}

fn eval_against_data(model: &MixtureModel, data: &Path, draws: Option<usize>, seed: u64) -> Result<Value> {
    let samples = read_samples_csv(open(data)?).with_context(|| format!("reading {}", data.display()))?;
    if samples.ncols() != model.dim() {
        bail!("model has dimension {}, data has {} columns", model.dim(), samples.ncols());
    }
    let draws = draws.unwrap_or(samples.nrows().min(10_000));
    let w = mc_mixture_w2(model, Reference::Samples(&samples), &mut rng::from_seed(seed), draws)?;
    let nll = if model.family().has_density() { Some(model.nll(&samples)?) } else { None };
    Ok(json!({
        "wass": w.value,
        "wass_method": w.method,
        "draws": draws,
        "nll": nll,
    }))
}

fn eval_models(a: &MixtureModel, b: &MixtureModel) -> Result<Value> {
    if a.family() != b.family() {
        bail!("models use different families ({} and {})", a.family().kind(), b.family().kind());
    }
    let weight = if a.family().covariance_scale().is_some() { ScatterWeight::Moment } else { ScatterWeight::Unit };
    let (d, plan) = d_u_weighted(a, b, weight)?;
    let pairwise = (0..a.k())
        .map(|i| (0..b.k()).map(|j| w2_elliptical(&a.component(i), &b.component(j), weight)).collect())
        .collect::<emmfit_core::Result<Vec<Vec<f64>>>>()?;
    Ok(json!({
        "d_u": d,
        "plan": plan.permutation,
        "matched_cost": plan.cost,
        "probability_term": plan.probability_term,
        "scatter_weight": match weight { ScatterWeight::Moment => "moment", ScatterWeight::Unit => "unit" },
        "pairwise_w2": pairwise,
    }))
}

/// Per-cell headline figures of a benchmark aggregate.
fn summarize_aggregate(agg: &Value) -> Result<Value> {
    const FIELDS: [&str; 6] = ["id", "wass_mean", "wass_std", "nll_mean", "nll_std", "fail_ratio"];
    let cells = agg.get("cells").and_then(Value::as_array).context("aggregate has no `cells` array")?;
    let rows = cells
        .iter()
        .map(|c| {
            let mut row = serde_json::Map::new();
            for f in FIELDS {
                let v = c.get(f).with_context(|| format!("cell is missing `{f}`"))?;
                row.insert(f.to_string(), v.clone());
            }
            Ok(Value::Object(row))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({ "cells": rows }))
}

fn cmd_bench(a: BenchArgs) -> Result<bool> {
    let mut suite = match &a.suite {
        Some(p) => BenchSuite::from_json(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => BenchSuite::default(),
    };
    if let Some(seed) = a.seed {
        suite.master_seed = seed;
    }
    let threads = thread_cap()?;
    let out = run_suite(&suite, threads)?;

    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    fs::write(a.out_dir.join("aggregate.json"), to_json_string(&out.aggregate)?)?;
    fs::write(a.out_dir.join("timings.json"), to_json_string(&out.timings)?)?;
    if !a.no_traces {
        let dir = a.out_dir.join("traces");
        fs::create_dir_all(&dir)?;
        let every = a.trace_every.unwrap_or_else(|| default_trace_every(suite.iters));
        for t in &out.traces {
            let lr = t.lr.map(|v| format!("_lr{v}")).unwrap_or_default();
            let name = format!("{}{lr}_d{}_i{}.csv", t.cell.replace('/', "_"), t.dataset, t.init);
            t.report.write_trace_csv(create(&dir.join(name))?, every)?;
        }
    }
    let failed: usize = out
        .aggregate
        .cells
        .iter()
        .flat_map(|c| &c.sweep)
        .map(|s| (s.fail_ratio * s.runs as f64).round() as usize)
        .sum();
    for c in &out.aggregate.cells {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<16} lr={:<6} wass {} ± {}  nll {} ± {}  fail {:.2}",
            c.id,
            c.best.lr.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
            fmt(c.best.wass_mean),
            fmt(c.best.wass_std),
            fmt(c.best.nll_mean),
            fmt(c.best.nll_std),
            c.best.fail_ratio
        );
    }
    if failed > 0 {
        eprintln!("{failed} of {} runs failed", suite.run_count());
    }
    Ok(failed == 0)
}

fn thread_cap() -> Result<usize> {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var(THREADS_VAR) {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("{THREADS_VAR}={v:?} is not a count"))?;
            Ok(n.clamp(1, available.max(1)))
        }
        Err(_) => Ok(available),
    }
}

fn load_model(path: &Path) -> Result<MixtureModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    model_from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

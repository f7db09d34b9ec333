//! Seeded benchmark suites: synthetic datasets × random initialisations ×
//! optimisers × stepsizes, aggregated per optimiser and shape.
//!
//! Every run draws its randomness from a child seed addressed by
//! `[shape, stream, ...]`, so results do not depend on the order or the thread
//! runs are executed on. Datasets and initial models are shared by all
//! methods within a shape.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::elliptical::{parse_family_kind, EllipticalFamily, FamilyKind};
use crate::error::{Error, Result};
use crate::mixture::{generate_synthetic, Dataset, MixtureModel, SyntheticSpec};
use crate::optim::{fit, initialize, FitReport, InitStrategy, Method, OptimizerConfig, Schedule};
use crate::rng;
use crate::transport::{mc_mixture_w2, Reference};

pub const SUITE_SCHEMA_VERSION: u32 = 1;
pub const AGGREGATE_SCHEMA_VERSION: u32 = 1;

// seed streams under each shape
const STREAM_DATA: u64 = 0;
const STREAM_INIT: u64 = 1;
const STREAM_FIT: u64 = 2;
const STREAM_WASS: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shape {
    pub m: usize,
    pub k: usize,
}

/// A benchmark sweep. Fields left out of the JSON take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSuite {
    pub schema_version: u32,
    pub master_seed: u64,
    pub shapes: Vec<Shape>,
    pub datasets: usize,
    pub inits: usize,
    /// Samples per dataset.
    pub n: usize,
    pub eccentricity: f64,
    pub separation: f64,
    /// Family fitted to the data, e.g. `kotz a=1 b=0.5 s=1`.
    pub family: String,
    pub methods: Vec<Method>,
    /// Stepsizes tried for every gradient method; EM ignores them.
    pub lr_grid: Vec<f64>,
    pub iters: usize,
    pub init: InitStrategy,
    /// Draws per side for the empirical Wasserstein distance.
    pub wass_draws: usize,
    /// Base optimiser settings; `method`, `lr` and `max_iters` are overridden.
    pub optimizer: OptimizerConfig,
}

impl Default for BenchSuite {
    fn default() -> Self {
        Self {
            schema_version: SUITE_SCHEMA_VERSION,
            master_seed: 0,
            shapes: vec![Shape { m: 2, k: 3 }],
            datasets: 5,
            inits: 10,
            n: 10_000,
            eccentricity: 10.0,
            separation: 10.0,
            family: FamilyKind::gaussian().to_string(),
            methods: vec![Method::Dadam, Method::Em],
            lr_grid: vec![0.01],
            iters: 2000,
            init: InitStrategy::Random,
            wass_draws: 10_000,
            optimizer: OptimizerConfig { adaptive_locations: true, ..OptimizerConfig::default() },
        }
    }
}

impl BenchSuite {
    pub fn from_json(text: &str) -> Result<Self> {
        let suite: BenchSuite = serde_json::from_str(text)?;
        suite.validate()?;
        Ok(suite)
    }

    pub fn family_kind(&self) -> Result<FamilyKind> {
        parse_family_kind(&self.family)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Config(what));
        if self.schema_version != SUITE_SCHEMA_VERSION {
            return bad(format!("unsupported suite schema_version {}", self.schema_version));
        }
        if self.shapes.is_empty() || self.methods.is_empty() || self.lr_grid.is_empty() {
            return bad("shapes, methods and lr_grid must be nonempty".into());
        }
        if self.datasets == 0 || self.inits == 0 || self.iters == 0 {
            return bad("datasets, inits and iters must be positive".into());
        }
        for (i, a) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(a) {
                return bad(format!("method {a} listed twice"));
            }
        }
        if self.lr_grid.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad("stepsizes must be finite and nonnegative".into());
        }
        if self.wass_draws < 2 || self.wass_draws > self.n {
            return bad(format!("wass_draws must lie in 2..={}", self.n));
        }
        let kind = self.family_kind()?;
        for s in &self.shapes {
            if s.m == 0 || s.k == 0 || s.k > self.n {
                return bad(format!("invalid shape m={} k={}", s.m, s.k));
            }
            EllipticalFamily::new(kind, s.m)?;
        }
        if !(self.eccentricity >= 1.0
            && self.separation > 0.0
            && self.eccentricity.is_finite()
            && self.separation.is_finite())
        {
            return bad("eccentricity must be >= 1 and separation > 0".into());
        }
        self.optimizer.validate()
    }

    /// Number of fits the sweep performs.
    pub fn run_count(&self) -> usize {
        let per_data = self.methods.iter().map(|&m| self.lrs(m).len()).sum::<usize>();
        self.shapes.len() * self.datasets * self.inits * per_data
    }

    fn lrs(&self, method: Method) -> Vec<Option<f64>> {
        if method == Method::Em {
            vec![None]
        } else {
            self.lr_grid.iter().copied().map(Some).collect()
        }
    }
}

/// Outcome of one fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub dataset: usize,
    pub init: usize,
    pub lr: Option<f64>,
    pub failed: bool,
    pub failure: Option<String>,
    pub wass: Option<f64>,
    pub nll: Option<f64>,
    /// NLL of the generating mixture on the same data.
    pub truth_nll: Option<f64>,
    pub iterations: usize,
    pub constraint_violations: usize,
}

/// Mean and sample standard deviation over successful runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub lr: Option<f64>,
    pub runs: usize,
    pub wass_mean: Option<f64>,
    pub wass_std: Option<f64>,
    pub nll_mean: Option<f64>,
    pub nll_std: Option<f64>,
    pub fail_ratio: f64,
}

/// One optimiser × shape cell, reported at its best stepsize.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub id: String,
    pub method: Method,
    pub m: usize,
    pub k: usize,
    #[serde(flatten)]
    pub best: Summary,
    /// Every stepsize tried, in grid order.
    pub sweep: Vec<Summary>,
    /// Runs at the best stepsize.
    pub records: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchAggregate {
    pub schema_version: u32,
    pub master_seed: u64,
    pub cells: Vec<CellSummary>,
}

/// Wall-clock figures, kept apart from the aggregate so that it stays reproducible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellTiming {
    pub id: String,
    pub lr: Option<f64>,
    pub ms_per_iter: f64,
    pub total_s: f64,
}

/// Full trace of one run, for convergence plots.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub cell: String,
    pub lr: Option<f64>,
    pub dataset: usize,
    pub init: usize,
    pub report: FitReport,
}

#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub aggregate: BenchAggregate,
    pub timings: Vec<CellTiming>,
    pub traces: Vec<RunTrace>,
}

pub fn cell_id(method: Method, shape: Shape) -> String {
    format!("{method}/m{}k{}", shape.m, shape.k)
}

struct Job {
    shape: usize,
    method: Method,
    lr_index: usize,
    lr: Option<f64>,
    dataset: usize,
    init: usize,
}

struct JobResult {
    record: RunRecord,
    ms_per_iter: f64,
    wall_s: f64,
    report: Option<FitReport>,
}

/// Runs the sweep on up to `threads` worker threads. The aggregate does not
/// depend on `threads`.
pub fn run_suite(suite: &BenchSuite, threads: usize) -> Result<BenchOutput> {
    suite.validate()?;
    let kind = suite.family_kind()?;

    let mut data: Vec<Vec<(Dataset, Option<f64>)>> = Vec::with_capacity(suite.shapes.len());
    let mut inits: Vec<Vec<Vec<MixtureModel>>> = Vec::with_capacity(suite.shapes.len());
    for (s, shape) in suite.shapes.iter().enumerate() {
        let family = EllipticalFamily::new(kind, shape.m)?;
        let spec = SyntheticSpec {
            m: shape.m,
            k: shape.k,
            n: suite.n,
            eccentricity: suite.eccentricity,
            separation: suite.separation,
        };
        let mut shape_data = Vec::with_capacity(suite.datasets);
        let mut shape_inits = Vec::with_capacity(suite.datasets);
        for d in 0..suite.datasets {
            let seed = rng::path_seed(suite.master_seed, &[s as u64, STREAM_DATA, d as u64]);
            let ds = generate_synthetic(&spec, &mut rng::from_seed(seed), seed)?;
            let truth_nll = ds.truth.as_ref().map(|t| t.nll(&ds.samples)).transpose()?;
            let models = (0..suite.inits)
                .map(|i| {
                    let seed = rng::path_seed(suite.master_seed, &[s as u64, STREAM_INIT, d as u64, i as u64]);
                    initialize(&ds.samples, shape.k, family, suite.init, &mut rng::from_seed(seed))
                })
                .collect::<Result<Vec<_>>>()?;
            shape_data.push((ds, truth_nll));
            shape_inits.push(models);
        }
        data.push(shape_data);
        inits.push(shape_inits);
    }

    let mut jobs = Vec::with_capacity(suite.run_count());
    for s in 0..suite.shapes.len() {
        for &method in &suite.methods {
            for (lr_index, lr) in suite.lrs(method).into_iter().enumerate() {
                for dataset in 0..suite.datasets {
                    for init in 0..suite.inits {
                        jobs.push(Job { shape: s, method, lr_index, lr, dataset, init });
                    }
                }
            }
        }
    }

    let run = |job: &Job| -> JobResult {
        let (ds, truth_nll) = &data[job.shape][job.dataset];
        let model0 = &inits[job.shape][job.dataset][job.init];
        let path = [job.method as u64, job.lr_index as u64, job.dataset as u64, job.init as u64];
        let seed_for = |stream: u64| {
            let mut full = vec![job.shape as u64, stream];
            full.extend_from_slice(&path);
            rng::path_seed(suite.master_seed, &full)
        };
        let cfg = OptimizerConfig {
            method: job.method,
            lr: Schedule::Constant(job.lr.unwrap_or(0.0)),
            max_iters: suite.iters,
            seed: seed_for(STREAM_FIT),
            ..suite.optimizer.clone()
        };
        let start = Instant::now();
        let outcome = fit(model0, &ds.samples, &cfg, &mut rng::from_seed(cfg.seed));
        let wall_s = start.elapsed().as_secs_f64();
        let mut record = RunRecord {
            dataset: job.dataset,
            init: job.init,
            lr: job.lr,
            failed: true,
            failure: None,
            wass: None,
            nll: None,
            truth_nll: *truth_nll,
            iterations: 0,
            constraint_violations: 0,
        };
        let report = match outcome {
            Ok(report) => report,
            Err(e) => {
                record.failure = Some(e.to_string());
                return JobResult { record, ms_per_iter: 0.0, wall_s, report: None };
            }
        };
        record.failed = report.failed;
        record.failure = report.failure.clone();
        record.nll = report.final_nll;
        record.iterations = report.iterations;
        record.constraint_violations = report.constraint_violations;
        let mut wrng = rng::from_seed(seed_for(STREAM_WASS));
        match mc_mixture_w2(&report.model, Reference::Samples(&ds.samples), &mut wrng, suite.wass_draws) {
            Ok(w) if w.value.is_finite() => record.wass = Some(w.value),
            Ok(_) => {
                record.failed = true;
                record.failure.get_or_insert_with(|| "non-finite Wasserstein distance".into());
            }
            Err(e) => {
                record.failed = true;
                record.failure.get_or_insert_with(|| e.to_string());
            }
        }
        if record.nll.is_some_and(|v| !v.is_finite()) {
            record.failed = true;
            record.failure.get_or_insert_with(|| "non-finite NLL".into());
        }
        JobResult { record, ms_per_iter: report.mean_ms_per_iter(), wall_s, report: Some(report) }
    };

    let results = execute(&jobs, threads.max(1), run);
    Ok(assemble(suite, &jobs, results))
}

fn execute<F>(jobs: &[Job], threads: usize, run: F) -> Vec<JobResult>
where
    F: Fn(&Job) -> JobResult + Sync,
{
    if threads == 1 || jobs.len() <= 1 {
        return jobs.iter().map(run).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<JobResult>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let result = run(job);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(result);
            });
        }
    });
    slots.into_inner().expect("workers joined").into_iter().map(|r| r.expect("every job ran")).collect()
}

fn assemble(suite: &BenchSuite, jobs: &[Job], results: Vec<JobResult>) -> BenchOutput {
    let mut cells = Vec::new();
    let mut timings = Vec::new();
    let mut traces = Vec::new();
    let mut results = results.into_iter().zip(jobs).peekable();
    for &shape in &suite.shapes {
        for &method in &suite.methods {
            let id = cell_id(method, shape);
            let mut sweep = Vec::new();
            let mut records_by_lr = Vec::new();
            for lr in suite.lrs(method) {
                let per_lr = suite.datasets * suite.inits;
                let mut records = Vec::with_capacity(per_lr);
                let (mut ms, mut total) = (0.0, 0.0);
                for _ in 0..per_lr {
                    let (res, job) = results.next().expect("one result per job");
                    debug_assert!(job.method == method && job.lr == lr);
                    ms += res.ms_per_iter;
                    total += res.wall_s;
                    if let Some(report) = res.report {
                        traces.push(RunTrace { cell: id.clone(), lr, dataset: job.dataset, init: job.init, report });
                    }
                    records.push(res.record);
                }
                timings.push(CellTiming { id: id.clone(), lr, ms_per_iter: ms / per_lr as f64, total_s: total });
                sweep.push(summarize(lr, &records));
                records_by_lr.push(records);
            }
            let best = best_index(&sweep);
            cells.push(CellSummary {
                id,
                method,
                m: shape.m,
                k: shape.k,
                best: sweep[best].clone(),
                sweep,
                records: records_by_lr.swap_remove(best),
            });
        }
    }
    debug_assert!(results.peek().is_none());
    BenchOutput {
        aggregate: BenchAggregate { schema_version: AGGREGATE_SCHEMA_VERSION, master_seed: suite.master_seed, cells },
        timings,
        traces,
    }
}

/// Lowest failure ratio first, then lowest mean Wasserstein distance; ties keep
/// the smaller stepsize.
fn best_index(sweep: &[Summary]) -> usize {
    let key = |s: &Summary| (s.fail_ratio, s.wass_mean.unwrap_or(f64::INFINITY));
    (0..sweep.len()).fold(0, |best, i| {
        let (a, b) = (key(&sweep[i]), key(&sweep[best]));
        if a.0 < b.0 || (a.0 == b.0 && a.1 < b.1) {
            i
        } else {
            best
        }
    })
}

pub fn summarize(lr: Option<f64>, records: &[RunRecord]) -> Summary {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| !r.failed).collect();
    let wass: Vec<f64> = ok.iter().filter_map(|r| r.wass).collect();
    let nll: Vec<f64> = ok.iter().filter_map(|r| r.nll).collect();
    let failed = records.len() - ok.len();
    Summary {
        lr,
        runs: records.len(),
        wass_mean: mean(&wass),
        wass_std: std_dev(&wass),
        nll_mean: mean(&nll),
        nll_std: std_dev(&nll),
        fail_ratio: if records.is_empty() { 0.0 } else { failed as f64 / records.len() as f64 },
    }
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation; zero for a single value.
pub fn std_dev(xs: &[f64]) -> Option<f64> {
    let mu = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    Some((xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> BenchSuite {
        BenchSuite {
            datasets: 2,
            inits: 2,
            n: 300,
            iters: 30,
            wass_draws: 200,
            lr_grid: vec![0.01, 0.03],
            methods: vec![Method::Dadam, Method::Em],
            ..BenchSuite::default()
        }
    }

    #[test]
    fn counts_and_layout() {
        let suite = tiny();
        assert_eq!(suite.run_count(), 2 * 2 * (2 + 1));
        let out = run_suite(&suite, 1).unwrap();
        assert_eq!(out.aggregate.cells.len(), 2);
        let dadam = &out.aggregate.cells[0];
        assert_eq!(dadam.id, "dadam/m2k3");
        assert_eq!(dadam.sweep.len(), 2);
        assert_eq!(dadam.records.len(), 4);
        assert_eq!(out.aggregate.cells[1].sweep.len(), 1);
        assert_eq!(out.traces.len(), suite.run_count());
        assert_eq!(out.timings.len(), 3);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let suite = tiny();
        let a = crate::io::to_json_string(&run_suite(&suite, 1).unwrap().aggregate).unwrap();
        let b = crate::io::to_json_string(&run_suite(&suite, 3).unwrap().aggregate).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn suite_json_round_trips_and_defaults() {
        let suite = tiny();
        let text = serde_json::to_string(&suite).unwrap();
        assert_eq!(BenchSuite::from_json(&text).unwrap(), suite);
        let partial = BenchSuite::from_json(r#"{"datasets": 3, "methods": ["em"]}"#).unwrap();
        assert_eq!(partial.datasets, 3);
        assert_eq!(partial.inits, BenchSuite::default().inits);
    }

    #[test]
    fn bad_suites_are_rejected() {
        for bad in [
            r#"{"shapes": []}"#,
            r#"{"methods": ["dadam", "dadam"]}"#,
            r#"{"lr_grid": [-1]}"#,
            r#"{"family": "nope"}"#,
            r#"{"wass_draws": 20000}"#,
            r#"{"schema_version": 2}"#,
            r#"{"unknown": 1}"#,
        ] {
            assert!(BenchSuite::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn sample_statistics() {
        assert_eq!(mean(&[]), None);
        assert_eq!(std_dev(&[2.0]), Some(0.0));
        assert!((std_dev(&[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
    }
}

//! Experiment orchestration: algorithm x instance x seed grids, F1 trajectories, allocation
//! exports and CSV aggregation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::design::{frank_wolfe_design, oracle_allocation, Design, DesignProblem, FwConfig, LevelObjective};
use crate::env::{generate, Environment, Generator, InstanceSpec, Threshold};
use crate::error::{Error, Result};
use crate::gp::{run_baseline, BaselineConfig, ConfidenceWidth, Policy};
use crate::kernels::{ArmSet, FeatureCombo, KernelSpec};
use crate::latte::{run_latte, BanditInstance};
use crate::melk::{run_melk, weighted_allocation, BatchMode, GammaSchedule, MelkConfig, DEFAULT_MAX_ROUNDS};
use crate::milk::{run_milk, MilkConfig};
use crate::run::RunResult;

pub const SCHEMA_VERSION: u32 = 1;

pub const METRIC_COLUMNS: [&str; 11] = [
    "schema_version",
    "algorithm",
    "instance",
    "seed",
    "checkpoint_samples",
    "f1",
    "n_good",
    "n_bad",
    "n_active",
    "round",
    "wall_time_ms",
];

/// `2PR / (P + R)`; 1 when both sets are empty and 0 when exactly one is.
pub fn f1_score(predicted: &[usize], truth: &[usize]) -> f64 {
    match (predicted.is_empty(), truth.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let tp = predicted.iter().filter(|p| truth.contains(p)).count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    let p = tp / predicted.len() as f64;
    let r = tp / truth.len() as f64;
    2.0 * p * r / (p + r)
}

/// Samples after which the declared set matches `truth` for the rest of the run, or `None`
/// if it does not match at the end.
pub fn samples_to_exact(result: &RunResult, truth: &[usize]) -> Option<u64> {
    let mut first = None;
    for s in &result.trajectory {
        if f1_score(&s.declared, truth) == 1.0 {
            first.get_or_insert(s.samples);
        } else {
            first = None;
        }
    }
    first
}

/// Like [`samples_to_exact`], but for the certified good set alone (no estimate-based
/// completion of undecided arms).
pub fn samples_to_certified(result: &RunResult, truth: &[usize]) -> Option<u64> {
    let mut first = None;
    for s in &result.trajectory {
        if f1_score(&s.good, truth) == 1.0 {
            first.get_or_insert(s.samples);
        } else {
            first = None;
        }
    }
    first
}

fn default_delta() -> f64 {
    0.1
}

fn default_beta_sqrt() -> f64 {
    3.0
}

/// Confidence width for GP baselines; `theoretical` uses the signal bound and noise level
/// of the instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WidthSpec {
    Fixed {
        #[serde(default = "default_beta_sqrt")]
        beta_sqrt: f64,
    },
    Theoretical {
        #[serde(default = "default_delta")]
        delta: f64,
    },
}

impl Default for WidthSpec {
    fn default() -> Self {
        WidthSpec::Fixed { beta_sqrt: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    Melk {
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default)]
        gamma: GammaSchedule,
        #[serde(default)]
        beta_tilde: f64,
        #[serde(default)]
        fw: FwConfig,
        #[serde(default)]
        batch_mode: Option<BatchMode>,
        #[serde(default = "default_max_rounds")]
        max_rounds: usize,
        #[serde(default)]
        export_allocations: bool,
    },
    Milk {
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default)]
        gamma: GammaSchedule,
        #[serde(default)]
        beta_tilde: f64,
        #[serde(default)]
        fw: FwConfig,
        #[serde(default = "default_max_rounds")]
        max_rounds: usize,
    },
    Latte {
        #[serde(default)]
        apt_tolerance: f64,
        #[serde(default)]
        additive_threshold: bool,
    },
    Baseline {
        policy: Policy,
        #[serde(default)]
        width: WidthSpec,
        /// Posterior noise variance; defaults to `max(sigma^2, 1e-6)`.
        #[serde(default)]
        noise_var: Option<f64>,
    },
}

fn default_max_rounds() -> usize {
    DEFAULT_MAX_ROUNDS
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::Melk { .. } => "melk",
            AlgorithmSpec::Milk { .. } => "milk",
            AlgorithmSpec::Latte { .. } => "latte",
            AlgorithmSpec::Baseline { policy, .. } => policy.name(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmEntry {
    /// Column value in the output; defaults to the algorithm name.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(flatten)]
    pub spec: AlgorithmSpec,
}

impl AlgorithmEntry {
    pub fn new(spec: AlgorithmSpec) -> Self {
        Self { label: None, spec }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.spec.name().to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Instance label written to the `instance` column.
    pub name: String,
    pub instance: InstanceSpec,
    pub algorithms: Vec<AlgorithmEntry>,
    pub seeds: Vec<u64>,
    /// Maximum samples per run.
    pub budget: u64,
    /// Sample counts at which metric rows are recorded.
    pub checkpoints: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("line {} column {}", e.line(), e.column()), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| {
            Error::config(format!("{}:{}:{}", path.display(), e.line(), e.column()), e.to_string())
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.instance.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms", "need at least one algorithm"));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::config("checkpoints", "need at least one checkpoint"));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("checkpoints", "must be strictly increasing"));
        }
        if self.budget == 0 {
            return Err(Error::config("budget", "must be positive"));
        }
        for (k, a) in self.algorithms.iter().enumerate() {
            let path = |field: &str| format!("algorithms[{k}].{field}");
            match (&a.spec, &self.instance.threshold) {
                (AlgorithmSpec::Melk { .. }, crate::env::ThresholdSpec::Implicit { .. }) => {
                    return Err(Error::config(path("kind"), "melk needs an explicit or quantile threshold"));
                }
                (AlgorithmSpec::Milk { .. } | AlgorithmSpec::Latte { .. }, t)
                    if !matches!(t, crate::env::ThresholdSpec::Implicit { .. }) =>
                {
                    return Err(Error::config(path("kind"), "milk and latte need an implicit threshold"));
                }
                _ => {}
            }
            if matches!(a.spec, AlgorithmSpec::Latte { .. })
                && !matches!(self.instance.generator, Generator::Bandit { .. })
            {
                return Err(Error::config(path("kind"), "latte runs on bandit instances only"));
            }
        }
        Ok(())
    }
}

/// One metric line of the output CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub schema_version: u32,
    pub algorithm: String,
    pub instance: String,
    pub seed: u64,
    pub checkpoint_samples: u64,
    pub f1: f64,
    pub n_good: usize,
    pub n_bad: usize,
    pub n_active: usize,
    pub round: usize,
    pub wall_time_ms: f64,
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl MetricRow {
    fn record(&self) -> [String; 11] {
        [
            self.schema_version.to_string(),
            self.algorithm.clone(),
            self.instance.clone(),
            self.seed.to_string(),
            self.checkpoint_samples.to_string(),
            format_float(self.f1),
            self.n_good.to_string(),
            self.n_bad.to_string(),
            self.n_active.to_string(),
            self.round.to_string(),
            format_float(self.wall_time_ms),
        ]
    }
}

pub fn write_metrics<W: std::io::Write>(out: W, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRIC_COLUMNS)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = headers.iter().collect();
    if got == expected {
        return Ok(());
    }
    let missing: Vec<&str> = expected.iter().filter(|c| !got.contains(c)).copied().collect();
    let unexpected: Vec<&str> = got.iter().filter(|c| !expected.contains(c)).copied().collect();
    Err(Error::Schema(format!(
        "missing columns {missing:?}, unexpected columns {unexpected:?}"
    )))
}

pub fn read_metrics<R: std::io::Read>(input: R) -> Result<Vec<MetricRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(rdr.headers()?, &METRIC_COLUMNS)?;
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let row: MetricRow = rec?;
        if row.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!("unsupported schema_version {}", row.schema_version)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// One algorithm run on one seed, plus its metric rows.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub label: String,
    pub seed: u64,
    pub result: RunResult,
    pub truth: Vec<usize>,
    pub rows: Vec<MetricRow>,
    pub allocations: Option<Vec<AllocationRow>>,
}

fn metric_rows(cfg: &ExperimentConfig, label: &str, seed: u64, result: &RunResult, truth: &[usize], wall_ms: f64) -> Vec<MetricRow> {
    cfg.checkpoints
        .iter()
        .map(|&c| {
            let snap = result.declared_at(c);
            let (declared, n_good, n_bad, n_active, round) = match snap {
                Some(s) => (s.declared.as_slice(), s.n_good(), s.n_bad, s.n_active, s.round),
                None => (&[][..], 0, 0, 0, 0),
            };
            MetricRow {
                schema_version: SCHEMA_VERSION,
                algorithm: label.to_string(),
                instance: cfg.name.clone(),
                seed,
                checkpoint_samples: c,
                f1: f1_score(declared, truth),
                n_good,
                n_bad,
                n_active,
                round,
                wall_time_ms: wall_ms,
            }
        })
        .collect()
}

fn alpha_of(env: &Environment) -> Result<f64> {
    match env.threshold() {
        Threshold::Explicit { alpha } => Ok(alpha),
        Threshold::Implicit { .. } => Err(Error::config("instance.threshold", "explicit threshold required")),
    }
}

fn epsilon_of(env: &Environment) -> Result<f64> {
    match env.threshold() {
        Threshold::Implicit { epsilon } => Ok(epsilon),
        Threshold::Explicit { .. } => Err(Error::config("instance.threshold", "implicit threshold required")),
    }
}

/// Runs one algorithm on a freshly generated instance for `seed`.
pub fn run_single(cfg: &ExperimentConfig, entry: &AlgorithmEntry, seed: u64) -> Result<SeedRun> {
    let mut env = generate(&cfg.instance, seed)?;
    let budget = cfg.instance.budget.map_or(cfg.budget, |b| b.min(cfg.budget));
    env.set_budget(Some(budget));
    let arms = env.arms().clone();
    let truth = env.truth().set;
    let sigma = env.sigma();
    let b = env.signal_bound();
    let start = Instant::now();
    let mut allocations = None;
    let result = match &entry.spec {
        AlgorithmSpec::Melk {
            delta,
            gamma,
            beta_tilde,
            fw,
            batch_mode,
            max_rounds,
            export_allocations,
        } => {
            let mut mc = MelkConfig::new(alpha_of(&env)?, *delta, b, sigma);
            mc.gamma = *gamma;
            mc.beta_tilde = *beta_tilde;
            mc.fw = *fw;
            mc.batch_mode = *batch_mode;
            mc.max_rounds = *max_rounds;
            mc.max_samples = Some(budget);
            let res = run_melk(&arms, &mut env, &mc, seed)?;
            if *export_allocations && !res.rounds.is_empty() {
                allocations = Some(allocation_rows(&env, &res, &mc)?);
            }
            res
        }
        AlgorithmSpec::Milk {
            delta,
            gamma,
            beta_tilde,
            fw,
            max_rounds,
        } => {
            let mut mc = MilkConfig::new(epsilon_of(&env)?, *delta, b, sigma);
            mc.gamma = *gamma;
            mc.beta_tilde = *beta_tilde;
            mc.fw = *fw;
            mc.max_rounds = *max_rounds;
            mc.max_samples = Some(budget);
            run_milk(&arms, &mut env, &mc, seed)?
        }
        AlgorithmSpec::Latte {
            apt_tolerance,
            additive_threshold,
        } => {
            let inst = BanditInstance {
                means: env.true_f().to_vec(),
                sigma,
                budget,
                epsilon: epsilon_of(&env)?,
                apt_tolerance: *apt_tolerance,
                additive_threshold: *additive_threshold,
            };
            run_latte(&inst, &mut env, seed)?.to_run_result()
        }
        AlgorithmSpec::Baseline {
            policy,
            width,
            noise_var,
        } => {
            let width = match *width {
                WidthSpec::Fixed { beta_sqrt } => ConfidenceWidth::Fixed { beta_sqrt },
                WidthSpec::Theoretical { delta } => ConfidenceWidth::Frequentist {
                    signal_bound: b,
                    sigma,
                    delta,
                },
            };
            let bc = BaselineConfig {
                policy: *policy,
                threshold: env.threshold(),
                width,
                noise_var: noise_var.unwrap_or((sigma * sigma).max(1e-6)),
                budget,
            };
            run_baseline(&arms, &mut env, &bc)?
        }
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let label = entry.label();
    let rows = metric_rows(cfg, &label, seed, &result, &truth, wall_ms);
    Ok(SeedRun {
        label,
        seed,
        result,
        truth,
        rows,
        allocations,
    })
}

/// One line of an allocation export. `round` is the round index, `-1` for the `4^t`-weighted
/// total and `-2` for the oracle allocation.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationRow {
    pub arm_index: usize,
    pub x: Vec<f64>,
    pub weight: f64,
    pub round: i64,
}

fn design_rows(env: &Environment, design: &Design, round: i64) -> Vec<AllocationRow> {
    design
        .weights()
        .iter()
        .enumerate()
        .map(|(i, &w)| AllocationRow {
            arm_index: i,
            x: env.arms().point(i).to_vec(),
            weight: w,
            round,
        })
        .collect()
}

/// Regularization used for oracle allocations on non-linear kernels when the run used none.
const ORACLE_GAMMA_FLOOR: f64 = 1e-7;

fn allocation_rows(env: &Environment, res: &RunResult, cfg: &MelkConfig) -> Result<Vec<AllocationRow>> {
    let mut rows = Vec::new();
    for r in &res.rounds {
        rows.extend(design_rows(env, &Design::new(r.design.clone())?, r.round as i64));
    }
    rows.extend(design_rows(env, &weighted_allocation(res)?, -1));
    let mut gamma = cfg.gamma.at(1);
    if gamma == 0.0 && !env.arms().kernel().is_linear() {
        gamma = ORACLE_GAMMA_FLOOR;
    }
    let oracle = oracle_allocation(
        env.arms(),
        env.true_f(),
        LevelObjective::Explicit { alpha: cfg.alpha },
        gamma,
        &cfg.fw,
    )?;
    rows.extend(design_rows(env, &oracle.design, -2));
    Ok(rows)
}

pub fn write_allocations<W: std::io::Write>(out: W, rows: &[AllocationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = rows.first().map_or(0, |r| r.x.len());
    let mut header = vec!["arm_index".to_string()];
    header.extend((0..dim).map(|k| format!("x{k}")));
    header.push("weight".into());
    header.push("round".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.arm_index.to_string()];
        rec.extend(r.x.iter().map(|v| format_float(*v)));
        rec.push(format_float(r.weight));
        rec.push(r.round.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every (algorithm, seed) pair using up to `jobs` threads. Rows come back sorted by
/// (algorithm, seed, checkpoint) regardless of scheduling.
pub fn run_grid(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<SeedRun>> {
    cfg.validate()?;
    let tasks: Vec<(usize, u64)> = (0..cfg.algorithms.len())
        .flat_map(|a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let jobs = jobs.clamp(1, tasks.len().max(1));
    let mut results: Vec<Option<Result<SeedRun>>> = (0..tasks.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                let tasks = &tasks;
                scope.spawn(move || {
                    tasks
                        .iter()
                        .enumerate()
                        .skip(j)
                        .step_by(jobs)
                        .map(|(k, &(a, s))| (k, run_single(cfg, &cfg.algorithms[a], s)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (k, r) in h.join().expect("worker thread panicked") {
                results[k] = Some(r);
            }
        }
    });
    let mut runs = results
        .into_iter()
        .map(|r| r.expect("every task ran"))
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by(|a, b| a.label.cmp(&b.label).then(a.seed.cmp(&b.seed)));
    Ok(runs)
}

/// Runs the grid and writes `metrics.csv` plus one allocation file per exporting run into
/// `out_dir`. Returns the written paths.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, jobs: usize) -> Result<Vec<PathBuf>> {
    let runs = run_grid(cfg, jobs)?;
    fs::create_dir_all(out_dir)?;
    let rows: Vec<MetricRow> = runs.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    let metrics = out_dir.join("metrics.csv");
    write_metrics(fs::File::create(&metrics)?, &rows)?;
    let mut written = vec![metrics];
    for r in &runs {
        if let Some(alloc) = &r.allocations {
            let p = out_dir.join(format!("allocations_{}_seed{}.csv", r.label, r.seed));
            write_allocations(fs::File::create(&p)?, alloc)?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Standalone design problem: explicit points, a kernel and optional target combinations
/// (each a list of `[arm, coefficient]`; all single arms by default).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSolveConfig {
    pub points: Vec<Vec<f64>>,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub targets: Option<Vec<Vec<(usize, f64)>>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub fw: FwConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSolveOutput {
    pub weights: Vec<f64>,
    pub value: f64,
    pub iters: usize,
}

pub fn solve_design(cfg: &DesignSolveConfig) -> Result<DesignSolveOutput> {
    let arms = ArmSet::new(cfg.points.clone(), cfg.kernel)?;
    let targets = match &cfg.targets {
        Some(ts) => ts
            .iter()
            .map(|t| FeatureCombo::new(t.iter().copied()))
            .collect::<Result<Vec<_>>>()?,
        None => (0..arms.len()).map(FeatureCombo::arm).collect(),
    };
    let mut problem = DesignProblem::new(&arms, targets, cfg.gamma)?;
    if let Some(w) = &cfg.weights {
        problem = problem.with_weights(w.clone())?;
    }
    let res = frank_wolfe_design(&problem, &cfg.fw)?;
    Ok(DesignSolveOutput {
        weights: res.design.weights().to_vec(),
        value: res.value,
        iters: res.iters,
    })
}

/// An instance and seed, used by `env-generate` and `oracle-allocation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub instance: InstanceSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub fw: FwConfig,
}

/// Lower-bound allocation for a generated instance, as allocation rows with round `-2`.
pub fn oracle_allocation_rows(cfg: &InstanceConfig) -> Result<Vec<AllocationRow>> {
    let env = generate(&cfg.instance, cfg.seed)?;
    let objective = match env.threshold() {
        Threshold::Explicit { alpha } => LevelObjective::Explicit { alpha },
        Threshold::Implicit { epsilon } => LevelObjective::Implicit { epsilon },
    };
    let mut gamma = cfg.gamma;
    if gamma == 0.0 && !env.arms().kernel().is_linear() {
        gamma = ORACLE_GAMMA_FLOOR;
    }
    let res = oracle_allocation(env.arms(), env.true_f(), objective, gamma, &cfg.fw)?;
    Ok(design_rows(&env, &res.design, -2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub instance: String,
    pub checkpoint_samples: u64,
    pub n_runs: usize,
    pub f1_mean: f64,
    pub f1_stderr: f64,
}

pub const SUMMARY_COLUMNS: [&str; 6] = [
    "algorithm",
    "instance",
    "checkpoint_samples",
    "n_runs",
    "f1_mean",
    "f1_stderr",
];

/// Mean and standard error (sample standard deviation over `sqrt(n)`) of F1 per
/// (algorithm, instance, checkpoint).
pub fn summarize(rows: &[MetricRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String, u64), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.algorithm.clone(), r.instance.clone(), r.checkpoint_samples))
            .or_default()
            .push(r.f1);
    }
    groups
        .into_iter()
        .map(|((algorithm, instance, checkpoint_samples), v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let stderr = if v.len() > 1 {
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                algorithm,
                instance,
                checkpoint_samples,
                n_runs: v.len(),
                f1_mean: mean,
                f1_stderr: stderr,
            }
        })
        .collect()
}

pub fn summarize_files(paths: &[PathBuf]) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for p in paths {
        let f = fs::File::open(p)?;
        rows.extend(read_metrics(f).map_err(|e| match e {
            Error::Schema(m) => Error::Schema(format!("{}: {m}", p.display())),
            other => other,
        })?);
    }
    Ok(summarize(&rows))
}

pub fn write_summary<W: std::io::Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.algorithm.clone(),
            r.instance.clone(),
            r.checkpoint_samples.to_string(),
            r.n_runs.to_string(),
            format_float(r.f1_mean),
            format_float(r.f1_stderr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

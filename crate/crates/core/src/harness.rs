//! Experiment runner and post-processing.
//!
//! An [`ExperimentConfig`] names a problem, an optimizer, a worker count, a
//! budget and a number of repetitions. [`run_experiment`] executes every
//! repetition, persists archives as JSON lines next to a small metadata file
//! and returns one [`RunRecord`] per repetition. The remaining functions are
//! pure post-processing over archives: hypervolume curves, area under the
//! curve, average rankings across tasks and summary tables.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{Nsga2, NsgaConfig, RandomSearch};
use crate::dbo::{
    guarded_eval, read_jsonl, run_threaded, simulate, write_jsonl, Agent, AgentConfig, Archive, AskTell, Budget,
    CentralizedPolicy, DecentralizedPolicy, Latency, SharedBudget, SimConfig, Trial, DEFAULT_DECAY_RATE,
    DEFAULT_KAPPA, DEFAULT_PERIOD,
};
use crate::error::{Error, Result};
use crate::indicators::{dominates_unchecked, gd_plus, hypervolume};
use crate::mobo::MoboConfig;
use crate::outcome::Outcome;
use crate::problems::{ProblemInstance, ProblemSpec};
use crate::transforms::TransformKind;

/// Number of analytic-front samples used as GD+ targets.
pub const GD_TARGETS: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DMoboParams {
    pub kappa: f64,
    pub decay_rate: f64,
    pub period: u64,
    pub mobo: MoboConfig,
}

impl Default for DMoboParams {
    fn default() -> Self {
        Self { kappa: DEFAULT_KAPPA, decay_rate: DEFAULT_DECAY_RATE, period: DEFAULT_PERIOD, mobo: MoboConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum OptimizerSpec {
    DMobo(DMoboParams),
    Random,
    Nsga2(NsgaConfig),
}

impl OptimizerSpec {
    /// Default label, e.g. `d-mobo-qu-L`.
    pub fn label(&self) -> String {
        match self {
            OptimizerSpec::DMobo(p) => {
                let t = match p.mobo.transform {
                    TransformKind::Identity => "id",
                    TransformKind::MinMaxLog => "mml",
                    TransformKind::QuantileUniform => "qu",
                };
                format!("d-mobo-{t}-{}", p.mobo.scalarization.short_name())
            }
            OptimizerSpec::Random => "random".into(),
            OptimizerSpec::Nsga2(_) => "nsga2".into(),
        }
    }
}

/// How the HVI reference point is chosen.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefRule {
    Explicit(Vec<f64>),
    /// Componentwise maximum of the finite observations.
    #[default]
    MaxOfObservations,
    /// Upper bounds where finite, maximum of observations elsewhere.
    BoundClipped,
}

impl RefRule {
    /// Parses `max`, `bound` or a comma-separated vector.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "max" | "max-of-observations" => Ok(RefRule::MaxOfObservations),
            "bound" | "bound-clipped" => Ok(RefRule::BoundClipped),
            v => v
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(RefRule::Explicit)
                .map_err(|e| Error::Config(format!("bad reference `{s}`: {e}"))),
        }
    }

    /// `None` when the rule needs observations and there are none.
    pub fn resolve<P: AsRef<[f64]>>(&self, points: &[P], upper_bounds: Option<&[f64]>) -> Option<Vec<f64>> {
        let max = componentwise_max(points);
        match self {
            RefRule::Explicit(r) => Some(r.clone()),
            RefRule::MaxOfObservations => max,
            RefRule::BoundClipped => {
                let max = max?;
                Some(match upper_bounds {
                    Some(ub) => max.iter().zip(ub).map(|(m, u)| if u.is_finite() { *u } else { *m }).collect(),
                    None => max,
                })
            }
        }
    }
}

fn componentwise_max<P: AsRef<[f64]>>(points: &[P]) -> Option<Vec<f64>> {
    let mut it = points.iter().map(AsRef::as_ref);
    let mut max = it.next()?.to_vec();
    for p in it {
        for (m, v) in max.iter_mut().zip(p) {
            *m = m.max(*v);
        }
    }
    Some(max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Execution {
    Simulated { latency: Latency },
    Threads,
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Simulated { latency: Latency::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub optimizer: OptimizerSpec,
    /// Overrides the optimizer's default label in file names and tables.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "one")]
    pub repetitions: usize,
    pub budget: Budget,
    #[serde(default)]
    pub seed: u64,
    /// Where archives are written; nothing is persisted when unset.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub hvi_reference: RefRule,
    /// Objective upper bounds used for `#VC` and, unless the optimizer
    /// sets its own, for the penalty.
    #[serde(default)]
    pub upper_bounds: Option<Vec<f64>>,
    #[serde(default)]
    pub execution: Execution,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn new(problem: ProblemSpec, optimizer: OptimizerSpec, budget: Budget) -> Self {
        Self {
            problem,
            optimizer,
            label: None,
            workers: 1,
            repetitions: 1,
            budget,
            seed: 0,
            output_dir: None,
            hvi_reference: RefRule::default(),
            upper_bounds: None,
            execution: Execution::default(),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn method(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.optimizer.label())
    }

    pub fn validate(&self) -> Result<ProblemInstance> {
        if self.workers == 0 || self.repetitions == 0 {
            return Err(Error::Config("workers and repetitions must be at least 1".into()));
        }
        let problem = self.problem.build()?;
        if let Some(ub) = &self.upper_bounds {
            if ub.len() != problem.n_objectives() {
                return Err(Error::Config(format!(
                    "{} upper bounds for {} objectives",
                    ub.len(),
                    problem.n_objectives()
                )));
            }
        }
        if let RefRule::Explicit(r) = &self.hvi_reference {
            if r.len() != problem.n_objectives() {
                return Err(Error::Config("reference point length does not match objectives".into()));
            }
        }
        match &self.optimizer {
            OptimizerSpec::DMobo(p) => self.agent_template(p, &problem, 0).validate()?,
            OptimizerSpec::Nsga2(c) => c.validate()?,
            OptimizerSpec::Random => {}
        }
        if let Execution::Simulated { latency } = &self.execution {
            latency.validate()?;
        }
        Ok(problem)
    }

    fn agent_template(&self, p: &DMoboParams, problem: &ProblemInstance, seed: u64) -> AgentConfig {
        let mut mobo = MoboConfig { n_objectives: problem.n_objectives(), ..p.mobo.clone() };
        if mobo.upper_bounds.is_none() {
            mobo.upper_bounds = self.upper_bounds.clone();
        }
        AgentConfig {
            rank: 0,
            n_agents: self.workers,
            kappa: p.kappa,
            decay_rate: p.decay_rate,
            period: p.period,
            seed_global: seed,
            mobo,
        }
    }
}

/// Metadata stored next to each archive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub task: String,
    pub method: String,
    pub workers: usize,
    pub rep: usize,
    pub seed: u64,
    pub upper_bounds: Option<Vec<f64>>,
    pub hvi_reference: RefRule,
    #[serde(default)]
    pub problem: Option<ProblemSpec>,
}

impl RunMeta {
    pub fn stem(&self) -> String {
        format!("{}_{}_w{}_r{}", self.task, self.method, self.workers, self.rep)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub archive_path: Option<PathBuf>,
    pub reference: Option<Vec<f64>>,
    /// HVI after each archived trial.
    pub hvi: Vec<f64>,
    /// `(t_complete, hvi)` after each archived trial.
    pub hvi_time: Vec<(f64, f64)>,
    /// GD+ of the running front after each trial, when the true front is known.
    pub gd_plus: Option<Vec<f64>>,
    pub auc: f64,
    pub final_hvi: f64,
    pub completed: usize,
    pub failures: usize,
    pub valid_count: usize,
}

/// Runs every repetition of `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let problem = cfg.validate()?;
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir)?;
    }
    let mut records = Vec::with_capacity(cfg.repetitions);
    for rep in 0..cfg.repetitions {
        let (meta, trials) = run_repetition_with(cfg, &problem, rep)?;
        let seed = meta.seed;
        let archive_path = match &cfg.output_dir {
            Some(dir) => {
                let path = dir.join(format!("{}.jsonl", meta.stem()));
                write_jsonl(&path, &trials)?;
                fs::write(dir.join(format!("{}.meta.json", meta.stem())), serde_json::to_vec_pretty(&meta)?)?;
                Some(path)
            }
            None => None,
        };
        let targets = true_front_targets(&problem, seed);
        let mut record = evaluate_run(&trials, meta, targets.as_deref())?;
        record.archive_path = archive_path;
        records.push(record);
    }
    if let Some(dir) = &cfg.output_dir {
        let stem = format!("{}_{}_w{}", problem.name(), cfg.method(), cfg.workers);
        fs::write(dir.join(format!("{stem}.manifest.json")), serde_json::to_vec_pretty(&Manifest::new(cfg, &records))?)?;
        write_hvi_csv(dir.join(format!("{stem}.hvi.csv")), &records)?;
    }
    Ok(records)
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    runs: Vec<ManifestRun<'a>>,
}

#[derive(Serialize)]
struct ManifestRun<'a> {
    rep: usize,
    seed: u64,
    archive: Option<&'a Path>,
    completed: usize,
    failures: usize,
    valid_count: usize,
    final_hvi: f64,
    auc: f64,
}

impl<'a> Manifest<'a> {
    fn new(config: &'a ExperimentConfig, records: &'a [RunRecord]) -> Self {
        let runs = records
            .iter()
            .map(|r| ManifestRun {
                rep: r.meta.rep,
                seed: r.meta.seed,
                archive: r.archive_path.as_deref(),
                completed: r.completed,
                failures: r.failures,
                valid_count: r.valid_count,
                final_hvi: r.final_hvi,
                auc: r.auc,
            })
            .collect();
        Self { config, runs }
    }
}

fn write_hvi_csv(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["rep", "index", "time", "hvi"])?;
    for r in records {
        for (i, (t, h)) in r.hvi_time.iter().enumerate() {
            w.write_record([r.meta.rep.to_string(), (i + 1).to_string(), t.to_string(), h.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Executes repetition `rep` of `cfg` without persisting or scoring it.
pub fn run_repetition(cfg: &ExperimentConfig, rep: usize) -> Result<(RunMeta, Vec<Trial>)> {
    let problem = cfg.validate()?;
    run_repetition_with(cfg, &problem, rep)
}

fn run_repetition_with(cfg: &ExperimentConfig, problem: &ProblemInstance, rep: usize) -> Result<(RunMeta, Vec<Trial>)> {
    let seed = cfg.seed + rep as u64;
    let trials = execute(cfg, problem, seed)?;
    let meta = RunMeta {
        task: problem.name().to_string(),
        method: cfg.method(),
        workers: cfg.workers,
        rep,
        seed,
        upper_bounds: cfg.upper_bounds.clone(),
        hvi_reference: cfg.hvi_reference.clone(),
        problem: Some(cfg.problem.clone()),
    };
    Ok((meta, trials))
}

/// Samples of the analytic front used as GD+ targets, if the problem has one.
pub fn true_front_targets(problem: &ProblemInstance, seed: u64) -> Option<Vec<Vec<f64>>> {
    problem.true_front(GD_TARGETS, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn execute(cfg: &ExperimentConfig, problem: &ProblemInstance, seed: u64) -> Result<Vec<Trial>> {
    let archive = Arc::new(Archive::in_memory());
    let func = |c: &crate::space::Configuration| problem.evaluate(c);
    let space = problem.space().clone();
    match (&cfg.execution, &cfg.optimizer) {
        (Execution::Simulated { latency }, opt) => {
            let sim = SimConfig { workers: cfg.workers, latency: *latency, budget: cfg.budget, seed: seed ^ 0x5151_5151 };
            match opt {
                OptimizerSpec::DMobo(p) => {
                    let tmpl = cfg.agent_template(p, problem, seed);
                    let mut pol = DecentralizedPolicy::new(space, &tmpl, cfg.workers, archive.clone())?;
                    simulate(&mut pol, &func, &sim)?;
                }
                OptimizerSpec::Random => {
                    simulate(&mut CentralizedPolicy::new(RandomSearch::new(space, seed), archive.clone()), &func, &sim)?;
                }
                OptimizerSpec::Nsga2(c) => {
                    let opt = Nsga2::new(space, NsgaConfig { seed, ..c.clone() })?;
                    simulate(&mut CentralizedPolicy::new(opt, archive.clone()), &func, &sim)?;
                }
            }
        }
        (Execution::Threads, OptimizerSpec::DMobo(p)) => {
            let tmpl = cfg.agent_template(p, problem, seed);
            let mut agents = tmpl
                .for_all_ranks(cfg.workers)
                .into_iter()
                .map(|c| Agent::new(space.clone(), c))
                .collect::<Result<Vec<_>>>()?;
            run_threaded(&mut agents, &archive, &func, cfg.budget)?;
        }
        (Execution::Threads, OptimizerSpec::Random) => {
            run_threaded_centralized(RandomSearch::new(space, seed), &archive, &func, cfg.workers, cfg.budget)?;
        }
        (Execution::Threads, OptimizerSpec::Nsga2(c)) => {
            let opt = Nsga2::new(space, NsgaConfig { seed, ..c.clone() })?;
            run_threaded_centralized(opt, &archive, &func, cfg.workers, cfg.budget)?;
        }
    }
    archive.snapshot()
}

/// Threads sharing one sequential optimizer behind a lock.
pub fn run_threaded_centralized<O, F>(optimizer: O, archive: &Archive, func: &F, workers: usize, budget: Budget) -> Result<()>
where
    O: AskTell + Send,
    F: Fn(&crate::space::Configuration) -> Outcome + Sync + ?Sized,
{
    let shared = SharedBudget::new(budget);
    let start = Instant::now();
    let opt = Mutex::new(optimizer);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (opt, shared) = (&opt, &shared);
                s.spawn(move || -> Result<()> {
                    let mut step = 0;
                    while shared.try_acquire(start) {
                        let x = opt.lock().expect("optimizer lock poisoned").ask()?;
                        let t_submit = start.elapsed().as_secs_f64();
                        let y = guarded_eval(func, &x);
                        let t_complete = start.elapsed().as_secs_f64();
                        opt.lock().expect("optimizer lock poisoned").tell(&x, &y)?;
                        archive.append(Trial {
                            agent_rank: w,
                            local_step: step,
                            config: x,
                            outcome: y,
                            t_submit,
                            t_complete,
                            kappa_used: None,
                        })?;
                        step += 1;
                    }
                    Ok(())
                })
            })
            .collect();
        handles.into_iter().try_for_each(|h| h.join().expect("worker thread panicked"))
    })
}

fn meets_bounds(y: &[f64], ub: Option<&[f64]>) -> bool {
    ub.is_none_or(|ub| y.iter().zip(ub).all(|(v, u)| v <= u))
}

/// Metrics of one archive; the reference follows `meta.hvi_reference`.
pub fn evaluate_run(trials: &[Trial], meta: RunMeta, targets: Option<&[Vec<f64>]>) -> Result<RunRecord> {
    let finite: Vec<&[f64]> = trials.iter().filter_map(|t| t.outcome.finite()).collect();
    let reference = meta.hvi_reference.resolve(&finite, meta.upper_bounds.as_deref());
    evaluate_run_with_reference(trials, meta, reference, targets)
}

/// Metrics of one archive against a given reference point.
pub fn evaluate_run_with_reference(
    trials: &[Trial],
    meta: RunMeta,
    reference: Option<Vec<f64>>,
    targets: Option<&[Vec<f64>]>,
) -> Result<RunRecord> {
    let finite: Vec<&[f64]> = trials.iter().filter_map(|t| t.outcome.finite()).collect();
    let hvi = match &reference {
        Some(r) => hvi_curve(trials, r)?,
        None => Vec::new(),
    };
    assert!(hvi.windows(2).all(|w| w[1] >= w[0]), "HVI series must be non-decreasing");
    let hvi_time = if hvi.is_empty() { Vec::new() } else { trials.iter().map(|t| t.t_complete).zip(hvi.iter().copied()).collect() };
    let gd = match targets {
        Some(t) if !finite.is_empty() && !t.is_empty() => Some(gd_plus_curve(trials, t)?),
        _ => None,
    };
    Ok(RunRecord {
        auc: auc(&hvi, hvi.len()),
        final_hvi: hvi.last().copied().unwrap_or(0.0),
        completed: finite.len(),
        failures: trials.len() - finite.len(),
        valid_count: finite.iter().filter(|y| meets_bounds(y, meta.upper_bounds.as_deref())).count(),
        meta,
        archive_path: None,
        reference,
        hvi,
        hvi_time,
        gd_plus: gd,
    })
}

/// Running Pareto front over a trial sequence; calls `f` after each trial
/// with whether the front changed.
fn running_front<F: FnMut(&[Vec<f64>], bool) -> Result<()>>(trials: &[Trial], keep: impl Fn(&[f64]) -> bool, mut f: F) -> Result<()> {
    let mut front: Vec<Vec<f64>> = Vec::new();
    for t in trials {
        let mut changed = false;
        if let Some(y) = t.outcome.finite() {
            if keep(y) && !front.iter().any(|p| dominates_unchecked(p, y) || p.as_slice() == y) {
                front.retain(|p| !dominates_unchecked(y, p));
                front.push(y.to_vec());
                changed = true;
            }
        }
        f(&front, changed)?;
    }
    Ok(())
}

/// HVI of the front of the first `k` trials, for every `k`. Empty when the
/// archive holds no finite trial. Points not strictly below the reference
/// add nothing.
pub fn hvi_curve(trials: &[Trial], reference: &[f64]) -> Result<Vec<f64>> {
    if trials.iter().all(|t| t.outcome.is_failure()) {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(trials.len());
    let mut current = 0.0;
    let below = |y: &[f64]| y.len() == reference.len() && y.iter().zip(reference).all(|(v, r)| v < r);
    running_front(trials, below, |front, changed| {
        if changed {
            current = hypervolume(front, reference)?;
        }
        out.push(current);
        Ok(())
    })?;
    Ok(out)
}

/// GD+ of the running front to `targets` after each trial; `NaN` before the
/// first finite trial.
pub fn gd_plus_curve(trials: &[Trial], targets: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(trials.len());
    let mut current = f64::NAN;
    running_front(trials, |_| true, |front, changed| {
        if changed {
            current = gd_plus(front, targets)?;
        }
        out.push(current);
        Ok(())
    })?;
    Ok(out)
}

/// Trapezoidal area under `series` over the normalized index `[0, 1]`, with
/// the series held at its last value up to `budget` points.
pub fn auc(series: &[f64], budget: usize) -> f64 {
    let Some(&last) = series.last() else { return 0.0 };
    let n = budget.max(series.len());
    if n == 1 {
        return last;
    }
    let at = |i: usize| series.get(i).copied().unwrap_or(last);
    (0..n - 1).map(|i| 0.5 * (at(i) + at(i + 1))).sum::<f64>() / (n - 1) as f64
}

/// Mean of a step function over `[0, horizon]` given `(time, value)` points
/// sorted by time; the value is 0 before the first point.
pub fn time_auc(points: &[(f64, f64)], horizon: f64) -> f64 {
    if horizon <= 0.0 {
        return 0.0;
    }
    let mut area = 0.0;
    let mut prev_t = 0.0;
    let mut prev_v = 0.0;
    for &(t, v) in points {
        let t = t.clamp(0.0, horizon);
        area += prev_v * (t - prev_t);
        prev_t = t;
        prev_v = v;
    }
    area += prev_v * (horizon - prev_t);
    area / horizon
}

/// First time at which a `(time, value)` series reaches `target`.
pub fn time_to_reach(points: &[(f64, f64)], target: f64) -> Option<f64> {
    points.iter().find(|(_, v)| *v >= target).map(|(t, _)| *t)
}

/// One HVI series to be ranked.
#[derive(Clone, Debug, PartialEq)]
pub struct RankInput {
    pub task: String,
    pub rep: usize,
    pub method: String,
    pub series: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodRanking {
    pub method: String,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Average ranks (1 = highest HVI) at each of `grid_len` evaluation counts.
///
/// Series are forward-filled to the grid. Methods are ranked within every
/// `(task, rep)` group, ties sharing the average rank; ranks are then
/// averaged over groups with a `1.96 * sd / sqrt(n)` band.
pub fn average_ranking(inputs: &[RankInput], grid_len: usize) -> Result<Vec<MethodRanking>> {
    let methods: Vec<String> = {
        let mut m: Vec<String> = inputs.iter().map(|i| i.method.clone()).collect();
        m.sort();
        m.dedup();
        m
    };
    if methods.len() < 2 {
        return Err(Error::InvalidArgument("ranking needs at least two methods".into()));
    }
    let mut groups: BTreeMap<(&str, usize), HashMap<&str, &[f64]>> = BTreeMap::new();
    for i in inputs {
        if groups.entry((&i.task, i.rep)).or_default().insert(&i.method, &i.series).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate series for {} on {} rep {}", i.method, i.task, i.rep)));
        }
    }
    for ((task, rep), g) in &groups {
        if g.len() != methods.len() {
            return Err(Error::InvalidArgument(format!("task {task} rep {rep} lacks some methods")));
        }
    }
    let n = groups.len() as f64;
    let m = methods.len();
    // ranks[method][grid][group]
    let mut ranks = vec![vec![Vec::with_capacity(groups.len()); grid_len]; m];
    for g in groups.values() {
        let series: Vec<&[f64]> = methods.iter().map(|name| g[name.as_str()]).collect();
        for k in 0..grid_len {
            let vals: Vec<f64> = series.iter().map(|s| forward_fill(s, k)).collect();
            for (mi, r) in average_ranks(&vals).into_iter().enumerate() {
                ranks[mi][k].push(r);
            }
        }
    }
    Ok(methods
        .into_iter()
        .zip(ranks)
        .map(|(method, per_grid)| {
            let mut mean = Vec::with_capacity(grid_len);
            let mut lower = Vec::with_capacity(grid_len);
            let mut upper = Vec::with_capacity(grid_len);
            for r in per_grid {
                let mu = r.iter().sum::<f64>() / n;
                let sd = if r.len() > 1 { (r.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
                let half = 1.96 * sd / n.sqrt();
                mean.push(mu);
                lower.push(mu - half);
                upper.push(mu + half);
            }
            MethodRanking { method, mean, lower, upper }
        })
        .collect())
}

fn forward_fill(series: &[f64], k: usize) -> f64 {
    match series.get(k) {
        Some(v) => *v,
        None => series.last().copied().unwrap_or(0.0),
    }
}

/// Ranks with 1 for the largest value; ties get the mean of their positions.
fn average_ranks(vals: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut ranks = vec![0.0; vals.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && vals[order[j + 1]] == vals[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: String,
    pub method: String,
    pub workers: usize,
    pub runs: usize,
    pub completed: f64,
    pub failures: f64,
    pub valid_count: f64,
    pub final_hvi: f64,
    pub final_hvi_se: f64,
    pub auc: f64,
}

/// Per task, method and worker count: mean `#D`, `#F`, `#VC`, final HVI
/// (with standard error) and AUC over repetitions.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.meta.task.clone(), r.meta.method.clone(), r.meta.workers)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((task, method, workers), rs)| {
            let n = rs.len() as f64;
            let mean = |f: &dyn Fn(&RunRecord) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
            let hv = mean(&|r| r.final_hvi);
            let se = if rs.len() > 1 {
                (rs.iter().map(|r| (r.final_hvi - hv).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
            } else {
                0.0
            };
            SummaryRow {
                task,
                method,
                workers,
                runs: rs.len(),
                completed: mean(&|r| r.completed as f64),
                failures: mean(&|r| r.failures as f64),
                valid_count: mean(&|r| r.valid_count as f64),
                final_hvi: hv,
                final_hvi_se: se,
                auc: mean(&|r| r.auc),
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// An archive on disk together with its metadata.
#[derive(Clone, Debug)]
pub struct StoredRun {
    pub path: PathBuf,
    pub meta: RunMeta,
    pub trials: Vec<Trial>,
}

/// Loads `<stem>.jsonl` archives matching `pattern` with their `<stem>.meta.json`.
pub fn load_runs(pattern: &str) -> Result<Vec<StoredRun>> {
    let mut runs = Vec::new();
    let paths = glob::glob(pattern).map_err(|e| Error::Config(format!("bad glob `{pattern}`: {e}")))?;
    for path in paths {
        let path = path.map_err(|e| Error::Io(e.into()))?;
        if path.extension().is_none_or(|e| e != "jsonl") {
            continue;
        }
        let meta_path = path.with_extension("meta.json");
        let meta: RunMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)?;
        let trials = read_jsonl(&path)?;
        runs.push(StoredRun { path, meta, trials });
    }
    runs.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(runs)
}

/// Metrics for stored runs, using each run's own reference rule.
pub fn records_from_runs(runs: &[StoredRun]) -> Result<Vec<RunRecord>> {
    runs.iter()
        .map(|r| {
            let targets = match &r.meta.problem {
                Some(spec) => true_front_targets(&spec.build()?, r.meta.seed),
                None => None,
            };
            let mut rec = evaluate_run(&r.trials, r.meta.clone(), targets.as_deref())?;
            rec.archive_path = Some(r.path.clone());
            Ok(rec)
        })
        .collect()
}

/// Componentwise max over all finite observations of the given archives.
pub fn pooled_reference<'a>(archives: impl IntoIterator<Item = &'a [Trial]>) -> Option<Vec<f64>> {
    let pts: Vec<&[f64]> = archives.into_iter().flat_map(|a| a.iter().filter_map(|t| t.outcome.finite())).collect();
    componentwise_max(&pts)
}

/// Ranking inputs from stored runs with one pooled reference per task.
pub fn rank_inputs_from_runs(runs: &[StoredRun]) -> Result<Vec<RankInput>> {
    let mut refs: HashMap<&str, Option<Vec<f64>>> = HashMap::new();
    for r in runs {
        refs.entry(&r.meta.task).or_insert_with(|| {
            pooled_reference(runs.iter().filter(|o| o.meta.task == r.meta.task).map(|o| o.trials.as_slice()))
        });
    }
    runs.iter()
        .map(|r| {
            let series = match &refs[r.meta.task.as_str()] {
                Some(reference) => hvi_curve(&r.trials, reference)?,
                None => Vec::new(),
            };
            Ok(RankInput { task: r.meta.task.clone(), rep: r.meta.rep, method: r.meta.method.clone(), series })
        })
        .collect()
}

//! Decentralized asynchronous optimization.
//!
//! Independent agents share nothing but an append-only [`Archive`]. Each
//! agent owns a [`Mobo`] state, a private random stream and a trade-off
//! `kappa0` drawn from an exponential distribution; its LCB trade-off decays
//! exponentially and resets every `period` steps.
//!
//! Runs can be driven by real threads ([`run_threaded`]) or by a
//! deterministic event-driven scheduler with simulated latencies
//! ([`simulate`]).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobo::{Mobo, MoboConfig};
use crate::outcome::Outcome;
use crate::space::{Configuration, SearchSpace};

pub const DEFAULT_KAPPA: f64 = 1.96;
pub const DEFAULT_DECAY_RATE: f64 = 0.25;
pub const DEFAULT_PERIOD: u64 = 25;

/// One archived evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub agent_rank: usize,
    pub local_step: u64,
    pub config: Configuration,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub t_submit: f64,
    pub t_complete: f64,
    pub kappa_used: Option<f64>,
}

impl Trial {
    pub fn duration(&self) -> f64 {
        self.t_complete - self.t_submit
    }
}

/// Position of one reader in an [`Archive`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cursor {
    entries: usize,
    offset: u64,
}

impl Cursor {
    /// Number of entries consumed so far.
    pub fn position(&self) -> usize {
        self.entries
    }
}

enum Backend {
    Memory(RwLock<Vec<Trial>>),
    File { path: PathBuf, lock: Mutex<()> },
}

/// Append-only trial log shared by all agents of a run.
///
/// The in-memory backend serves threads of one process. The file backend
/// writes one JSON object per line and lets independent processes append to
/// and follow the same file.
pub struct Archive {
    backend: Backend,
}

impl std::fmt::Debug for Archive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.backend {
            Backend::Memory(v) => write!(f, "Archive(memory, {} entries)", v.read().map(|v| v.len()).unwrap_or(0)),
            Backend::File { path, .. } => write!(f, "Archive({})", path.display()),
        }
    }
}

impl Default for Archive {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl Archive {
    pub fn in_memory() -> Self {
        Self { backend: Backend::Memory(RwLock::new(Vec::new())) }
    }

    /// Opens (creating if needed) a JSON-lines archive. Existing entries are kept.
    pub fn file_backed(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { backend: Backend::File { path, lock: Mutex::new(()) } })
    }

    pub fn append(&self, trial: Trial) -> Result<()> {
        match &self.backend {
            Backend::Memory(v) => {
                v.write().expect("archive lock poisoned").push(trial);
            }
            Backend::File { path, lock } => {
                let mut line = serde_json::to_vec(&trial)?;
                line.push(b'\n');
                let _guard = lock.lock().expect("archive lock poisoned");
                let mut f = OpenOptions::new().append(true).open(path)?;
                f.write_all(&line)?;
                f.flush()?;
            }
        }
        Ok(())
    }

    /// A cursor positioned before the first entry.
    pub fn cursor(&self) -> Cursor {
        Cursor::default()
    }

    /// Entries appended since the cursor's last read, in append order.
    pub fn read_new(&self, cursor: &mut Cursor) -> Result<Vec<Trial>> {
        match &self.backend {
            Backend::Memory(v) => {
                let v = v.read().expect("archive lock poisoned");
                let new = v[cursor.entries..].to_vec();
                cursor.entries = v.len();
                Ok(new)
            }
            Backend::File { path, .. } => {
                let mut f = File::open(path)?;
                f.seek(SeekFrom::Start(cursor.offset))?;
                let mut buf = Vec::new();
                f.read_to_end(&mut buf)?;
                // only consume complete lines; a concurrent writer may be mid-line
                let end = buf.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
                let mut out = Vec::new();
                for line in buf[..end].split(|&b| b == b'\n').filter(|l| !l.is_empty()) {
                    out.push(serde_json::from_slice(line)?);
                }
                cursor.offset += end as u64;
                cursor.entries += out.len();
                Ok(out)
            }
        }
    }

    pub fn snapshot(&self) -> Result<Vec<Trial>> {
        self.read_new(&mut Cursor::default())
    }

    pub fn len(&self) -> Result<usize> {
        match &self.backend {
            Backend::Memory(v) => Ok(v.read().expect("archive lock poisoned").len()),
            Backend::File { .. } => Ok(self.snapshot()?.len()),
        }
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.len()? == 0)
    }
}

/// Writes trials as JSON lines, replacing the file.
pub fn write_jsonl(path: impl AsRef<Path>, trials: &[Trial]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for t in trials {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<Trial>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Evaluates a black box, turning panics and non-finite values into failures.
pub fn guarded_eval<F>(func: &F, config: &Configuration) -> Outcome
where
    F: Fn(&Configuration) -> Outcome + ?Sized,
{
    match catch_unwind(AssertUnwindSafe(|| func(config))) {
        Ok(Outcome::Objectives(y)) => Outcome::checked(y),
        Ok(f) => f,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "black box panicked".into());
            Outcome::failure(msg)
        }
    }
}

/// `kappa0 * exp(-lambda * (t mod period))`.
pub fn kappa_schedule(kappa0: f64, t: u64, lambda: f64, period: u64) -> f64 {
    kappa0 * (-lambda * (t % period.max(1)) as f64).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub rank: usize,
    pub n_agents: usize,
    pub kappa: f64,
    pub decay_rate: f64,
    pub period: u64,
    pub seed_global: u64,
    pub mobo: MoboConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            rank: 0,
            n_agents: 1,
            kappa: DEFAULT_KAPPA,
            decay_rate: DEFAULT_DECAY_RATE,
            period: DEFAULT_PERIOD,
            seed_global: 0,
            mobo: MoboConfig::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank >= self.n_agents {
            return Err(Error::InvalidArgument(format!(
                "rank {} outside 0..{}",
                self.rank, self.n_agents
            )));
        }
        if self.period == 0 {
            return Err(Error::InvalidArgument("period must be at least 1".into()));
        }
        if !(self.decay_rate >= 0.0 && self.decay_rate.is_finite()) {
            return Err(Error::InvalidArgument("decay rate must be finite and >= 0".into()));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidArgument("kappa must be finite and > 0".into()));
        }
        self.mobo.validate()
    }

    /// Configs for ranks `0..n_agents` sharing everything else.
    pub fn for_all_ranks(&self, n_agents: usize) -> Vec<AgentConfig> {
        (0..n_agents).map(|rank| AgentConfig { rank, n_agents, ..self.clone() }).collect()
    }
}

/// Initial trade-off and local seed of agent `rank`.
///
/// The global stream yields `n_agents` exponential draws followed by
/// `n_agents` non-negative 63-bit integers; the agent takes the entries at
/// its own rank, so every agent gets a distinct trade-off and stream.
pub fn agent_seeds(seed_global: u64, n_agents: usize, rank: usize, kappa: f64) -> (f64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_global);
    let kappas: Vec<f64> = (0..n_agents).map(|_| -kappa * (1.0 - rng.random::<f64>()).ln()).collect();
    let seeds: Vec<u64> = (0..n_agents).map(|_| rng.random::<u64>() >> 1).collect();
    (kappas[rank], seeds[rank])
}

/// One decentralized optimizer.
pub struct Agent {
    cfg: AgentConfig,
    kappa0: f64,
    seed_local: u64,
    mobo: Mobo,
    cursor: Cursor,
    step: u64,
    deliveries: Vec<(usize, u64)>,
}

impl std::fmt::Debug for Agent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Agent")
            .field("rank", &self.cfg.rank)
            .field("kappa0", &self.kappa0)
            .field("step", &self.step)
            .finish()
    }
}

impl Agent {
    pub fn new(space: Arc<SearchSpace>, cfg: AgentConfig) -> Result<Self> {
        cfg.validate()?;
        let (kappa0, seed_local) = agent_seeds(cfg.seed_global, cfg.n_agents, cfg.rank, cfg.kappa);
        let mobo = Mobo::new(space, cfg.mobo.clone(), seed_local)?;
        Ok(Self { cfg, kappa0, seed_local, mobo, cursor: Cursor::default(), step: 0, deliveries: Vec::new() })
    }

    pub fn rank(&self) -> usize {
        self.cfg.rank
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    pub fn seed_local(&self) -> u64 {
        self.seed_local
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn mobo(&self) -> &Mobo {
        &self.mobo
    }

    /// `(agent_rank, local_step)` of every trial passed to `observe`, in order.
    pub fn deliveries(&self) -> &[(usize, u64)] {
        &self.deliveries
    }

    pub fn current_kappa(&self) -> f64 {
        kappa_schedule(self.kappa0, self.step, self.cfg.decay_rate, self.cfg.period)
    }

    /// Next configuration and the trade-off used to pick it.
    pub fn ask(&mut self) -> Result<(Configuration, f64)> {
        let kappa = self.current_kappa();
        Ok((self.mobo.suggest(kappa)?, kappa))
    }

    /// Publishes an own result and learns from everything new in the archive.
    pub fn tell(&mut self, archive: &Archive, config: Configuration, outcome: Outcome, t_submit: f64, t_complete: f64, kappa: f64) -> Result<()> {
        let rank = self.cfg.rank;
        let mut batch: Vec<Trial> = archive.read_new(&mut self.cursor)?.into_iter().filter(|t| t.agent_rank != rank).collect();
        let own = Trial {
            agent_rank: rank,
            local_step: self.step,
            config,
            outcome,
            t_submit,
            t_complete,
            kappa_used: Some(kappa),
        };
        archive.append(own.clone())?;
        batch.push(own);
        self.observe(batch)?;
        self.step += 1;
        Ok(())
    }

    /// Observes whatever other agents appended since the last read.
    pub fn catch_up(&mut self, archive: &Archive) -> Result<usize> {
        let rank = self.cfg.rank;
        let batch: Vec<Trial> = archive.read_new(&mut self.cursor)?.into_iter().filter(|t| t.agent_rank != rank).collect();
        let n = batch.len();
        if n > 0 {
            self.observe(batch)?;
        }
        Ok(n)
    }

    fn observe(&mut self, batch: Vec<Trial>) -> Result<()> {
        self.deliveries.extend(batch.iter().map(|t| (t.agent_rank, t.local_step)));
        let (configs, outcomes) = batch.into_iter().map(|t| (t.config, t.outcome)).unzip();
        self.mobo.observe(configs, outcomes)
    }

    /// Sequential loop against a shared archive with wall-clock timestamps
    /// measured from `start`.
    pub fn run<F>(&mut self, archive: &Archive, func: &F, budget: &SharedBudget, start: Instant) -> Result<()>
    where
        F: Fn(&Configuration) -> Outcome + ?Sized,
    {
        while budget.try_acquire(start) {
            let (x, kappa) = self.ask()?;
            let t_submit = start.elapsed().as_secs_f64();
            let y = guarded_eval(func, &x);
            let t_complete = start.elapsed().as_secs_f64();
            self.tell(archive, x, y, t_submit, t_complete, kappa)?;
        }
        Ok(())
    }
}

/// When a run stops launching evaluations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Total number of evaluations across all workers.
    Evaluations(usize),
    /// Seconds of (real or simulated) time; evaluations finishing later are discarded.
    WallClock(f64),
}

/// Budget shared by concurrently running threads.
#[derive(Debug)]
pub struct SharedBudget {
    budget: Budget,
    launched: AtomicUsize,
}

impl SharedBudget {
    pub fn new(budget: Budget) -> Self {
        Self { budget, launched: AtomicUsize::new(0) }
    }

    /// Reserves one evaluation if the budget allows it.
    pub fn try_acquire(&self, start: Instant) -> bool {
        match self.budget {
            Budget::Evaluations(n) => self
                .launched
                .fetch_update(AtomicOrdering::SeqCst, AtomicOrdering::SeqCst, |k| (k < n).then_some(k + 1))
                .is_ok(),
            Budget::WallClock(h) => start.elapsed().as_secs_f64() < h,
        }
    }
}

/// Runs all agents on scoped threads against one archive.
pub fn run_threaded<F>(agents: &mut [Agent], archive: &Archive, func: &F, budget: Budget) -> Result<()>
where
    F: Fn(&Configuration) -> Outcome + Sync + ?Sized,
{
    let shared = SharedBudget::new(budget);
    let start = Instant::now();
    std::thread::scope(|s| {
        let handles: Vec<_> = agents.iter_mut().map(|a| s.spawn(|| a.run(archive, func, &shared, start))).collect();
        handles.into_iter().try_for_each(|h| h.join().expect("agent thread panicked"))
    })?;
    for a in agents.iter_mut() {
        a.catch_up(archive)?;
    }
    Ok(())
}

/// Simulated evaluation time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Latency {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
    Exponential { mean: f64 },
}

impl Default for Latency {
    fn default() -> Self {
        Latency::Constant { value: 1.0 }
    }
}

impl Latency {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Latency::Constant { value } => value > 0.0 && value.is_finite(),
            Latency::Uniform { low, high } => low > 0.0 && high >= low && high.is_finite(),
            Latency::Exponential { mean } => mean > 0.0 && mean.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid latency {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Latency::Constant { value } => value,
            Latency::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            Latency::Exponential { mean } => -mean * (1.0 - rng.random::<f64>()).ln(),
        }
    }
}

/// Settings of the deterministic scheduler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub workers: usize,
    pub latency: Latency,
    pub budget: Budget,
    pub seed: u64,
}

/// An optimizer that can be driven by several workers at once.
pub trait AsyncPolicy {
    /// Next configuration for `worker`, with the LCB trade-off if any.
    fn ask(&mut self, worker: usize) -> Result<(Configuration, Option<f64>)>;

    /// Records a finished evaluation of `worker`.
    fn tell(&mut self, worker: usize, config: Configuration, outcome: Outcome, t_submit: f64, t_complete: f64, kappa: Option<f64>) -> Result<()>;

    fn archive(&self) -> &Archive;

    /// Called once after the last evaluation.
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Sequential ask/tell optimizer, e.g. a baseline.
pub trait AskTell {
    fn ask(&mut self) -> Result<Configuration>;
    fn tell(&mut self, config: &Configuration, outcome: &Outcome) -> Result<()>;
}

/// One [`Agent`] per worker sharing one archive.
#[derive(Debug)]
pub struct DecentralizedPolicy {
    agents: Vec<Agent>,
    archive: Arc<Archive>,
}

impl DecentralizedPolicy {
    pub fn new(space: Arc<SearchSpace>, template: &AgentConfig, n_agents: usize, archive: Arc<Archive>) -> Result<Self> {
        let agents = template
            .for_all_ranks(n_agents)
            .into_iter()
            .map(|cfg| Agent::new(space.clone(), cfg))
            .collect::<Result<_>>()?;
        Ok(Self { agents, archive })
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn into_agents(self) -> Vec<Agent> {
        self.agents
    }
}

impl AsyncPolicy for DecentralizedPolicy {
    fn ask(&mut self, worker: usize) -> Result<(Configuration, Option<f64>)> {
        let (x, k) = self.agents[worker].ask()?;
        Ok((x, Some(k)))
    }

    fn tell(&mut self, worker: usize, config: Configuration, outcome: Outcome, t_submit: f64, t_complete: f64, kappa: Option<f64>) -> Result<()> {
        let kappa = kappa.unwrap_or_else(|| self.agents[worker].current_kappa());
        self.agents[worker].tell(&self.archive, config, outcome, t_submit, t_complete, kappa)
    }

    fn archive(&self) -> &Archive {
        &self.archive
    }

    fn finish(&mut self) -> Result<()> {
        for a in &mut self.agents {
            a.catch_up(&self.archive)?;
        }
        Ok(())
    }
}

/// A single sequential optimizer serving all workers.
#[derive(Debug)]
pub struct CentralizedPolicy<O> {
    optimizer: O,
    archive: Arc<Archive>,
    steps: Vec<u64>,
}

impl<O: AskTell> CentralizedPolicy<O> {
    pub fn new(optimizer: O, archive: Arc<Archive>) -> Self {
        Self { optimizer, archive, steps: Vec::new() }
    }

    pub fn optimizer(&self) -> &O {
        &self.optimizer
    }
}

impl<O: AskTell> AsyncPolicy for CentralizedPolicy<O> {
    fn ask(&mut self, _worker: usize) -> Result<(Configuration, Option<f64>)> {
        Ok((self.optimizer.ask()?, None))
    }

    fn tell(&mut self, worker: usize, config: Configuration, outcome: Outcome, t_submit: f64, t_complete: f64, kappa: Option<f64>) -> Result<()> {
        self.optimizer.tell(&config, &outcome)?;
        if self.steps.len() <= worker {
            self.steps.resize(worker + 1, 0);
        }
        let local_step = self.steps[worker];
        self.steps[worker] += 1;
        self.archive.append(Trial { agent_rank: worker, local_step, config, outcome, t_submit, t_complete, kappa_used: kappa })
    }

    fn archive(&self) -> &Archive {
        &self.archive
    }
}

struct Pending {
    t_complete: f64,
    worker: usize,
    t_submit: f64,
    config: Configuration,
    outcome: Outcome,
    kappa: Option<f64>,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // reversed so that BinaryHeap pops the earliest completion, lowest worker first
    fn cmp(&self, other: &Self) -> Ordering {
        other.t_complete.total_cmp(&self.t_complete).then_with(|| other.worker.cmp(&self.worker))
    }
}

/// Event-driven simulation of `sim.workers` parallel workers.
///
/// Each worker asks, evaluates (instantly, in real time) and reports back
/// after a sampled latency. Completions are processed in order of simulated
/// time, ties going to the lower worker index, so a run is a pure function
/// of the seeds.
pub fn simulate<P, F>(policy: &mut P, func: &F, sim: &SimConfig) -> Result<()>
where
    P: AsyncPolicy + ?Sized,
    F: Fn(&Configuration) -> Outcome + ?Sized,
{
    if sim.workers == 0 {
        return Err(Error::InvalidArgument("at least one worker is required".into()));
    }
    sim.latency.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let mut heap = BinaryHeap::new();
    let mut launched = 0usize;
    let can_launch = |launched: usize, now: f64| match sim.budget {
        Budget::Evaluations(n) => launched < n,
        Budget::WallClock(h) => now < h,
    };

    let launch = |policy: &mut P, worker: usize, now: f64, rng: &mut ChaCha8Rng, heap: &mut BinaryHeap<Pending>| -> Result<()> {
        let (config, kappa) = policy.ask(worker)?;
        let outcome = guarded_eval(func, &config);
        let t_complete = now + sim.latency.sample(rng);
        heap.push(Pending { t_complete, worker, t_submit: now, config, outcome, kappa });
        Ok(())
    };

    for w in 0..sim.workers {
        if !can_launch(launched, 0.0) {
            break;
        }
        launch(policy, w, 0.0, &mut rng, &mut heap)?;
        launched += 1;
    }
    while let Some(p) = heap.pop() {
        let now = p.t_complete;
        if let Budget::WallClock(h) = sim.budget {
            if now > h {
                continue;
            }
        }
        let worker = p.worker;
        policy.tell(worker, p.config, p.outcome, p.t_submit, p.t_complete, p.kappa)?;
        if can_launch(launched, now) {
            launch(policy, worker, now, &mut rng, &mut heap)?;
            launched += 1;
        }
    }
    policy.finish()
}

/// Fraction of `workers` with an evaluation in flight at each grid time.
pub fn utilization_curve(trials: &[Trial], workers: usize, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&t| {
            let busy = trials.iter().filter(|tr| tr.t_submit <= t && t < tr.t_complete).count();
            if workers == 0 {
                0.0
            } else {
                busy as f64 / workers as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::dtlz;
    use crate::space::ParamValue;
    use crate::surrogate::ForestConfig;
    use std::collections::HashMap;

    fn quick_mobo(n_obj: usize) -> MoboConfig {
        MoboConfig {
            n_initial: 5,
            pool_size: 256,
            forest: ForestConfig { n_trees: 10, ..Default::default() },
            ..MoboConfig::new(n_obj)
        }
    }

    fn trial(rank: usize, step: u64, t0: f64, t1: f64) -> Trial {
        Trial {
            agent_rank: rank,
            local_step: step,
            config: Configuration::new(vec![("x0".into(), ParamValue::Real(0.5))]),
            outcome: Outcome::Objectives(vec![1.0, 2.0]),
            t_submit: t0,
            t_complete: t1,
            kappa_used: None,
        }
    }

    #[test]
    fn kappa_schedule_examples() {
        assert_eq!(kappa_schedule(1.96, 0, 0.25, 25), 1.96);
        assert_eq!(kappa_schedule(1.96, 25, 0.25, 25), 1.96);
        assert!((kappa_schedule(1.96, 4, 0.25, 25) - 0.7210).abs() < 1e-4);
        assert_eq!(kappa_schedule(1.5, 3, 0.0, 25), 1.5);
    }

    #[test]
    fn agent_seed_protocol() {
        let (k0, s0) = agent_seeds(7, 2, 0, 1.96);
        let (k1, s1) = agent_seeds(7, 2, 1, 1.96);
        assert_ne!(s0, s1);
        assert_ne!(k0, k1);
        assert!(s0 < 1 << 63 && s1 < 1 << 63);
        // a single agent takes the only integer drawn
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let _: f64 = rng.random();
        assert_eq!(agent_seeds(7, 1, 0, 1.96).1, rng.random::<u64>() >> 1);
    }

    #[test]
    fn kappa0_mean() {
        let n = 100_000;
        let mean = (0..n).map(|s| agent_seeds(s, 1, 0, 1.96).0).sum::<f64>() / n as f64;
        assert!((mean / 1.96 - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn invalid_rank_rejected() {
        let space = Arc::new(SearchSpace::unit_cube(2).unwrap());
        let cfg = AgentConfig { rank: 2, n_agents: 2, ..Default::default() };
        assert!(Agent::new(space.clone(), cfg).is_err());
        let cfg = AgentConfig { period: 0, ..Default::default() };
        assert!(Agent::new(space, cfg).is_err());
    }

    #[test]
    fn memory_cursors_exactly_once() {
        let a = Archive::in_memory();
        let mut c1 = a.cursor();
        let mut c2 = a.cursor();
        a.append(trial(0, 0, 0.0, 1.0)).unwrap();
        assert_eq!(a.read_new(&mut c1).unwrap().len(), 1);
        a.append(trial(1, 0, 0.0, 1.0)).unwrap();
        assert_eq!(a.read_new(&mut c1).unwrap().len(), 1);
        assert_eq!(a.read_new(&mut c1).unwrap().len(), 0);
        let all = a.read_new(&mut c2).unwrap();
        assert_eq!(all.iter().map(|t| t.agent_rank).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(c2.position(), 2);
    }

    #[test]
    fn file_backend_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let a = Archive::file_backed(&path).unwrap();
        let b = Archive::file_backed(&path).unwrap();
        let mut cur = b.cursor();
        a.append(trial(0, 0, 0.0, 1.0)).unwrap();
        let mut failed = trial(1, 0, 0.5, 2.0);
        failed.outcome = Outcome::failure("boom");
        failed.kappa_used = Some(0.5);
        b.append(failed.clone()).unwrap();
        let got = a.read_new(&mut cur).unwrap();
        assert_eq!(got, vec![trial(0, 0, 0.0, 1.0), failed]);
        assert!(a.read_new(&mut cur).unwrap().is_empty());
        assert_eq!(read_jsonl(&path).unwrap().len(), 2);
        assert_eq!(a.len().unwrap(), 2);
    }

    #[test]
    fn trial_json_shape() {
        let t = trial(3, 4, 0.0, 1.5);
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(
            s,
            r#"{"agent_rank":3,"local_step":4,"config":{"x0":0.5},"objectives":[1.0,2.0],"t_submit":0.0,"t_complete":1.5,"kappa_used":null}"#
        );
    }

    #[test]
    fn guarded_eval_catches_panics() {
        let c = Configuration::default();
        let panicky = |_: &Configuration| -> Outcome { panic!("exploded") };
        assert_eq!(guarded_eval(&panicky, &c), Outcome::failure("exploded"));
        let nan = |_: &Configuration| Outcome::Objectives(vec![f64::NAN]);
        assert!(guarded_eval(&nan, &c).is_failure());
    }

    #[test]
    fn utilization_examples() {
        let grid: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        assert!(utilization_curve(&[], 4, &grid).iter().all(|&u| u == 0.0));
        assert!(utilization_curve(&[trial(0, 0, 0.0, 1.0)], 1, &grid).iter().all(|&u| u == 1.0));
        let two = [trial(0, 0, 0.0, 0.5), trial(1, 0, 0.5, 1.0)];
        assert!(utilization_curve(&two, 2, &grid).iter().all(|&u| u == 0.5));
    }

    #[test]
    fn single_agent_initial_budget_is_random() {
        let p = dtlz(2, 4, 2).unwrap();
        let archive = Arc::new(Archive::in_memory());
        let tmpl = AgentConfig { mobo: quick_mobo(2), ..Default::default() };
        let mut pol = DecentralizedPolicy::new(p.space().clone(), &tmpl, 1, archive.clone()).unwrap();
        let sim = SimConfig { workers: 1, latency: Latency::default(), budget: Budget::Evaluations(5), seed: 0 };
        simulate(&mut pol, &|c: &Configuration| p.evaluate(c), &sim).unwrap();
        assert_eq!(archive.len().unwrap(), 5);
        assert!(pol.agents()[0].mobo().len() == 5);
        let sim0 = SimConfig { budget: Budget::Evaluations(0), ..sim };
        let before = archive.len().unwrap();
        simulate(&mut pol, &|c: &Configuration| p.evaluate(c), &sim0).unwrap();
        assert_eq!(archive.len().unwrap(), before);
    }

    #[test]
    fn every_agent_sees_every_trial_once() {
        let p = dtlz(2, 6, 2).unwrap();
        let archive = Arc::new(Archive::in_memory());
        let tmpl = AgentConfig { seed_global: 3, mobo: quick_mobo(2), ..Default::default() };
        let mut pol = DecentralizedPolicy::new(p.space().clone(), &tmpl, 4, archive.clone()).unwrap();
        let sim = SimConfig {
            workers: 4,
            latency: Latency::Exponential { mean: 1.0 },
            budget: Budget::Evaluations(40),
            seed: 11,
        };
        simulate(&mut pol, &|c: &Configuration| p.evaluate(c), &sim).unwrap();
        let all = archive.snapshot().unwrap();
        assert_eq!(all.len(), 40);
        for agent in pol.agents() {
            let mut counts: HashMap<(usize, u64), usize> = HashMap::new();
            for d in agent.deliveries() {
                *counts.entry(*d).or_default() += 1;
            }
            assert_eq!(counts.len(), 40);
            assert!(counts.values().all(|&c| c == 1));
        }
    }

    #[test]
    fn wall_clock_budget_drops_late_results() {
        let p = dtlz(2, 4, 2).unwrap();
        let archive = Arc::new(Archive::in_memory());
        let tmpl = AgentConfig { mobo: quick_mobo(2), ..Default::default() };
        let mut pol = DecentralizedPolicy::new(p.space().clone(), &tmpl, 2, archive.clone()).unwrap();
        let sim = SimConfig { workers: 2, latency: Latency::Constant { value: 1.0 }, budget: Budget::WallClock(3.5), seed: 0 };
        simulate(&mut pol, &|c: &Configuration| p.evaluate(c), &sim).unwrap();
        let all = archive.snapshot().unwrap();
        assert_eq!(all.len(), 6);
        assert!(all.iter().all(|t| t.t_complete <= 3.5 && t.t_complete >= t.t_submit));
    }

    #[test]
    fn threaded_run_respects_budget() {
        let p = dtlz(2, 4, 2).unwrap();
        let archive = Archive::in_memory();
        let tmpl = AgentConfig { mobo: quick_mobo(2), ..Default::default() };
        let mut agents: Vec<Agent> = tmpl
            .for_all_ranks(3)
            .into_iter()
            .map(|c| Agent::new(p.space().clone(), c).unwrap())
            .collect();
        run_threaded(&mut agents, &archive, &|c: &Configuration| p.evaluate(c), Budget::Evaluations(12)).unwrap();
        let all = archive.snapshot().unwrap();
        assert_eq!(all.len(), 12);
        assert_eq!(agents.iter().map(|a| a.step()).sum::<u64>(), 12);
        assert!(agents.iter().all(|a| a.deliveries().len() == 12 && a.mobo().len() == 12));
    }

    #[test]
    fn simulation_is_deterministic() {
        let p = dtlz(2, 4, 2).unwrap();
        let run = || {
            let archive = Arc::new(Archive::in_memory());
            let tmpl = AgentConfig { seed_global: 9, mobo: quick_mobo(2), ..Default::default() };
            let mut pol = DecentralizedPolicy::new(p.space().clone(), &tmpl, 3, archive.clone()).unwrap();
            let sim = SimConfig { workers: 3, latency: Latency::Uniform { low: 0.5, high: 1.5 }, budget: Budget::Evaluations(20), seed: 4 };
            simulate(&mut pol, &|c: &Configuration| p.evaluate(c), &sim).unwrap();
            archive.snapshot().unwrap()
        };
        assert_eq!(run(), run());
    }
}

//! Comparators: random search and a steady-state NSGA-II.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dbo::AskTell;
use crate::error::{Error, Result};
use crate::indicators::dominates_unchecked;
use crate::outcome::Outcome;
use crate::space::{Configuration, Domain, SearchSpace};

/// One draw of random search.
pub fn random_search_step<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> Configuration {
    space.sample(rng)
}

#[derive(Debug)]
pub struct RandomSearch {
    space: Arc<SearchSpace>,
    rng: ChaCha8Rng,
}

impl RandomSearch {
    pub fn new(space: Arc<SearchSpace>, seed: u64) -> Self {
        Self { space, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl AskTell for RandomSearch {
    fn ask(&mut self) -> Result<Configuration> {
        Ok(random_search_step(&self.space, &mut self.rng))
    }

    fn tell(&mut self, _config: &Configuration, _outcome: &Outcome) -> Result<()> {
        Ok(())
    }
}

/// Partition into non-domination ranks; `fronts[0]` is the Pareto front.
pub fn fast_nondominated_sort<P: AsRef<[f64]>>(points: &[P]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (points[i].as_ref(), points[j].as_ref());
            if dominates_unchecked(a, b) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates_unchecked(b, a) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each member of a front.
pub fn crowding_distance<P: AsRef<[f64]>>(front: &[P]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = front[0].as_ref().len();
    let mut dist = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..m {
        order.sort_by(|&a, &b| front[a].as_ref()[k].total_cmp(&front[b].as_ref()[k]));
        let lo = front[order[0]].as_ref()[k];
        let hi = front[order[n - 1]].as_ref()[k];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in order.windows(3) {
            let gap = front[w[2]].as_ref()[k] - front[w[0]].as_ref()[k];
            dist[w[1]] += gap / range;
        }
    }
    dist
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NsgaConfig {
    pub population_size: usize,
    pub crossover_prob: f64,
    /// Per-variable mutation probability; `1 / dim` when unset.
    pub mutation_prob: Option<f64>,
    pub eta_crossover: f64,
    pub eta_mutation: f64,
    pub seed: u64,
}

impl Default for NsgaConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            crossover_prob: 0.9,
            mutation_prob: None,
            eta_crossover: 15.0,
            eta_mutation: 20.0,
            seed: 0,
        }
    }
}

impl NsgaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 || !self.population_size.is_multiple_of(2) {
            return Err(Error::InvalidArgument("population size must be even and at least 4".into()));
        }
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.crossover_prob) || !self.mutation_prob.is_none_or(prob) {
            return Err(Error::InvalidArgument("probabilities must lie in [0, 1]".into()));
        }
        if !(self.eta_crossover > 0.0 && self.eta_mutation > 0.0) {
            return Err(Error::InvalidArgument("distribution indices must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub config: Configuration,
    pub encoded: Vec<f64>,
    pub outcome: Outcome,
}

/// Rank and crowding of every individual; failures share the last rank.
pub fn rank_and_crowding(pool: &[Individual]) -> (Vec<usize>, Vec<f64>) {
    let finite: Vec<(usize, &[f64])> = pool.iter().enumerate().filter_map(|(i, p)| p.outcome.finite().map(|y| (i, y))).collect();
    let points: Vec<&[f64]> = finite.iter().map(|(_, y)| *y).collect();
    let fronts = fast_nondominated_sort(&points);
    let mut rank = vec![fronts.len(); pool.len()];
    let mut crowd = vec![0.0; pool.len()];
    for (r, front) in fronts.iter().enumerate() {
        let members: Vec<&[f64]> = front.iter().map(|&j| points[j]).collect();
        for (&j, d) in front.iter().zip(crowding_distance(&members)) {
            rank[finite[j].0] = r;
            crowd[finite[j].0] = d;
        }
    }
    (rank, crowd)
}

/// Index the steady-state truncation removes: worst rank, then least crowded,
/// then the most recently inserted.
pub fn truncation_victim(pool: &[Individual]) -> Option<usize> {
    let (rank, crowd) = rank_and_crowding(pool);
    (0..pool.len()).rev().min_by(|&a, &b| rank[b].cmp(&rank[a]).then(crowd[a].total_cmp(&crowd[b])))
}

/// Steady-state NSGA-II over encoded configurations.
#[derive(Debug)]
pub struct Nsga2 {
    space: Arc<SearchSpace>,
    cfg: NsgaConfig,
    rng: ChaCha8Rng,
    pool: Vec<Individual>,
    bounds: Vec<(f64, f64)>,
    categorical: Vec<bool>,
    asked: usize,
}

impl Nsga2 {
    pub fn new(space: Arc<SearchSpace>, cfg: NsgaConfig) -> Result<Self> {
        cfg.validate()?;
        let bounds = space.params().iter().map(|p| p.encoded_bounds()).collect();
        let categorical = space.params().iter().map(|p| matches!(p.domain(), Domain::Categorical { .. })).collect();
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Self { space, cfg, rng, pool: Vec::new(), bounds, categorical, asked: 0 })
    }

    pub fn config(&self) -> &NsgaConfig {
        &self.cfg
    }

    pub fn pool(&self) -> &[Individual] {
        &self.pool
    }

    fn mutation_prob(&self) -> f64 {
        self.cfg.mutation_prob.unwrap_or(1.0 / self.space.dim().max(1) as f64)
    }

    fn tournament(&mut self, rank: &[usize], crowd: &[f64]) -> usize {
        let a = self.rng.random_range(0..self.pool.len());
        let b = self.rng.random_range(0..self.pool.len());
        let better_b = rank[b] < rank[a] || (rank[b] == rank[a] && crowd[b] > crowd[a]);
        if better_b {
            b
        } else {
            a
        }
    }

    fn sbx(&mut self, x: &mut [f64], other: &[f64]) -> bool {
        let eta = self.cfg.eta_crossover;
        let mut changed = false;
        for i in 0..x.len() {
            if self.rng.random::<f64>() >= 0.5 {
                continue;
            }
            if self.categorical[i] {
                if x[i] != other[i] {
                    x[i] = other[i];
                    changed = true;
                }
                continue;
            }
            let (lb, ub) = self.bounds[i];
            let (y1, y2) = if x[i] < other[i] { (x[i], other[i]) } else { (other[i], x[i]) };
            if y2 - y1 < 1e-14 {
                continue;
            }
            let u: f64 = self.rng.random();
            let spread = |beta: f64| {
                let alpha = 2.0 - beta.powf(-(eta + 1.0));
                if u <= 1.0 / alpha {
                    (u * alpha).powf(1.0 / (eta + 1.0))
                } else {
                    (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
                }
            };
            let c1 = 0.5 * ((y1 + y2) - spread(1.0 + 2.0 * (y1 - lb) / (y2 - y1)) * (y2 - y1));
            let c2 = 0.5 * ((y1 + y2) + spread(1.0 + 2.0 * (ub - y2) / (y2 - y1)) * (y2 - y1));
            x[i] = if self.rng.random::<bool>() { c1 } else { c2 }.clamp(lb, ub);
            changed = true;
        }
        changed
    }

    fn mutate(&mut self, x: &mut [f64]) -> bool {
        let pm = self.mutation_prob();
        let eta = self.cfg.eta_mutation;
        let mut changed = false;
        for i in 0..x.len() {
            if self.rng.random::<f64>() >= pm {
                continue;
            }
            let (lb, ub) = self.bounds[i];
            if ub <= lb {
                continue;
            }
            changed = true;
            if self.categorical[i] {
                x[i] = self.rng.random_range(0..=ub as usize) as f64;
                continue;
            }
            let y = x[i];
            let u: f64 = self.rng.random();
            let pow = 1.0 / (eta + 1.0);
            let dq = if u < 0.5 {
                let xy = 1.0 - (y - lb) / (ub - lb);
                (2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0)).powf(pow) - 1.0
            } else {
                let xy = 1.0 - (ub - y) / (ub - lb);
                1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0)).powf(pow)
            };
            x[i] = (y + dq * (ub - lb)).clamp(lb, ub);
        }
        changed
    }
}

impl AskTell for Nsga2 {
    fn ask(&mut self) -> Result<Configuration> {
        self.asked += 1;
        if self.asked <= self.cfg.population_size || self.pool.len() < 2 {
            return Ok(self.space.sample(&mut self.rng));
        }
        let (rank, crowd) = rank_and_crowding(&self.pool);
        let p1 = self.tournament(&rank, &crowd);
        let p2 = self.tournament(&rank, &crowd);
        let mut child = self.pool[p1].encoded.clone();
        let mut changed = false;
        if self.rng.random::<f64>() < self.cfg.crossover_prob {
            let other = self.pool[p2].encoded.clone();
            changed |= self.sbx(&mut child, &other);
        }
        changed |= self.mutate(&mut child);
        if changed {
            self.space.decode(&child)
        } else {
            Ok(self.pool[p1].config.clone())
        }
    }

    fn tell(&mut self, config: &Configuration, outcome: &Outcome) -> Result<()> {
        let encoded = self.space.encode(config)?;
        self.pool.push(Individual { config: config.clone(), encoded, outcome: outcome.clone() });
        if self.pool.len() > self.cfg.population_size {
            let victim = truncation_victim(&self.pool).expect("pool is non-empty");
            self.pool.remove(victim);
        }
        Ok(())
    }
}

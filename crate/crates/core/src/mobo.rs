//! Sequential multi-objective Bayesian optimizer.
//!
//! `observe` normalizes all finite objective rows, adds the bound-violation
//! penalty, scalarizes every row with freshly sampled simplex weights, imputes
//! failed rows with the worst scalar value and retrains the forest.
//! `suggest` samples at random until `n_initial` observations exist and then
//! minimizes the lower confidence bound `mu - kappa * sigma` over a random
//! candidate pool.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::indicators::extract_pareto_front;
use crate::outcome::Outcome;
use crate::scalarize::{sample_simplex_weights, Scalarization, WeightVector};
use crate::space::{grid_or_random_candidates, Configuration, SearchSpace};
use crate::surrogate::{ForestConfig, RegressionForest};
use crate::transforms::{FittedTransform, TransformKind};

pub const DEFAULT_GAMMA: f64 = 2.0;
pub const DEFAULT_POOL_SIZE: usize = 8192;
pub const DEFAULT_N_INITIAL: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MoboConfig {
    pub n_initial: usize,
    pub n_objectives: usize,
    /// Objective upper bounds; the penalty is only applied with the
    /// quantile-uniform transform.
    pub upper_bounds: Option<Vec<f64>>,
    pub gamma: f64,
    pub transform: TransformKind,
    pub scalarization: Scalarization,
    pub forest: ForestConfig,
    pub pool_size: usize,
}

impl Default for MoboConfig {
    fn default() -> Self {
        Self {
            n_initial: DEFAULT_N_INITIAL,
            n_objectives: 2,
            upper_bounds: None,
            gamma: DEFAULT_GAMMA,
            transform: TransformKind::QuantileUniform,
            scalarization: Scalarization::Linear,
            forest: ForestConfig::default(),
            pool_size: DEFAULT_POOL_SIZE,
        }
    }
}

impl MoboConfig {
    pub fn new(n_objectives: usize) -> Self {
        Self { n_objectives, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_initial == 0 {
            return Err(Error::InvalidArgument("n_initial must be at least 1".into()));
        }
        if self.n_objectives == 0 {
            return Err(Error::InvalidArgument("n_objectives must be at least 1".into()));
        }
        if let Some(ub) = &self.upper_bounds {
            check_len(self.n_objectives, ub.len())?;
            if ub.iter().any(|v| v.is_nan()) {
                return Err(Error::InvalidArgument("upper bounds must not be NaN".into()));
            }
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidArgument("gamma must be finite and nonnegative".into()));
        }
        if self.pool_size == 0 {
            return Err(Error::InvalidArgument("pool_size must be at least 1".into()));
        }
        self.forest.validate()
    }
}

/// Adds `gamma * sum_i max(row_i - bound_i, 0)` to every coordinate of each row.
pub fn penalize(rows: &[Vec<f64>], bounds: &[f64], gamma: f64) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|row| {
            let p = gamma * row.iter().zip(bounds).map(|(y, b)| (y - b).max(0.0)).sum::<f64>();
            row.iter().map(|y| y + p).collect()
        })
        .collect()
}

/// Intermediate arrays of one observe step.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarizedBatch {
    /// Transformed finite rows, in observation order.
    pub normalized: Vec<Vec<f64>>,
    /// `normalized` plus penalty.
    pub penalized: Vec<Vec<f64>>,
    pub bounds_normalized: Option<Vec<f64>>,
    pub weights: WeightVector,
    pub utopia: Vec<f64>,
    /// One scalar per observation; `None` when no finite row exists to impute from.
    pub targets: Vec<Option<f64>>,
}

/// Normalize, penalize, scalarize and impute one full observation history.
pub fn scalarize_observations(
    outcomes: &[Outcome],
    transform: TransformKind,
    upper_bounds: Option<&[f64]>,
    gamma: f64,
    scalarization: &Scalarization,
    weights: WeightVector,
) -> Result<ScalarizedBatch> {
    let fitted = FittedTransform::fit(transform, outcomes)?;
    let normalized = outcomes
        .iter()
        .filter_map(Outcome::finite)
        .map(|y| fitted.apply(y))
        .collect::<Result<Vec<_>>>()?;
    let (penalized, bounds_normalized) = match (upper_bounds, transform) {
        (Some(ub), TransformKind::QuantileUniform) => {
            let ubu = fitted.apply_to_bounds(ub)?;
            (penalize(&normalized, &ubu, gamma), Some(ubu))
        }
        _ => (normalized.clone(), None),
    };
    let n_obj = fitted.n_objectives();
    let utopia = penalized.iter().fold(vec![f64::INFINITY; n_obj], |mut z, row| {
        for (zi, v) in z.iter_mut().zip(row) {
            *zi = zi.min(*v);
        }
        z
    });
    let scalars = penalized
        .iter()
        .map(|row| scalarization.apply(row, &weights, &utopia))
        .collect::<Result<Vec<_>>>()?;
    let worst = scalars.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut finite = scalars.into_iter();
    let targets = outcomes
        .iter()
        .map(|o| match o.finite() {
            Some(_) => finite.next(),
            None => Some(worst),
        })
        .collect();
    Ok(ScalarizedBatch { normalized, penalized, bounds_normalized, weights, utopia, targets })
}

pub struct Mobo {
    space: Arc<SearchSpace>,
    cfg: MoboConfig,
    configs: Vec<Configuration>,
    encoded: Vec<Vec<f64>>,
    outcomes: Vec<Outcome>,
    forest: Option<RegressionForest>,
    last_batch: Option<ScalarizedBatch>,
    rng: ChaCha8Rng,
}

impl Mobo {
    pub fn new(space: Arc<SearchSpace>, cfg: MoboConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            space,
            cfg,
            configs: Vec::new(),
            encoded: Vec::new(),
            outcomes: Vec::new(),
            forest: None,
            last_batch: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn config(&self) -> &MoboConfig {
        &self.cfg
    }

    pub fn space(&self) -> &Arc<SearchSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configurations(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn forest(&self) -> Option<&RegressionForest> {
        self.forest.as_ref()
    }

    /// Drops the trained surrogate; the next `observe` rebuilds it.
    pub fn clear_forest(&mut self) {
        self.forest = None;
    }

    /// Arrays from the most recent `observe` that had finite data.
    pub fn last_batch(&self) -> Option<&ScalarizedBatch> {
        self.last_batch.as_ref()
    }

    pub fn observe(&mut self, configs: Vec<Configuration>, outcomes: Vec<Outcome>) -> Result<()> {
        check_len(configs.len(), outcomes.len())?;
        let mut encoded = Vec::with_capacity(configs.len());
        for (c, o) in configs.iter().zip(&outcomes) {
            encoded.push(self.space.encode(c)?);
            if let Outcome::Objectives(y) = o {
                check_len(self.cfg.n_objectives, y.len())?;
            }
        }
        self.configs.extend(configs);
        self.encoded.extend(encoded);
        self.outcomes.extend(outcomes);

        if self.outcomes.iter().all(Outcome::is_failure) {
            self.forest = None;
            return Ok(());
        }
        let weights = sample_simplex_weights(self.cfg.n_objectives, &mut self.rng)?;
        let batch = scalarize_observations(
            &self.outcomes,
            self.cfg.transform,
            self.cfg.upper_bounds.as_deref(),
            self.cfg.gamma,
            &self.cfg.scalarization,
            weights,
        )?;
        let (xs, ys): (Vec<&[f64]>, Vec<f64>) = self
            .encoded
            .iter()
            .zip(&batch.targets)
            .filter_map(|(x, t)| t.map(|t| (x.as_slice(), t)))
            .unzip();
        let forest_cfg = ForestConfig { rng_seed: self.rng.random(), ..self.cfg.forest.clone() };
        self.forest = Some(RegressionForest::train(&forest_cfg, &xs, &ys)?);
        self.last_batch = Some(batch);
        Ok(())
    }

    pub fn suggest(&mut self, kappa: f64) -> Result<Configuration> {
        if self.configs.len() < self.cfg.n_initial || self.forest.is_none() {
            return Ok(self.space.sample(&mut self.rng));
        }
        let pool = grid_or_random_candidates(&self.space, self.cfg.pool_size, &mut self.rng)?;
        let best = self.argmin_lcb(&pool, kappa)?;
        Ok(pool.into_iter().nth(best).expect("index within pool"))
    }

    /// LCB minimizer over a caller-supplied pool, ties to the lowest index.
    /// Falls back to the first candidate when no forest is trained.
    pub fn argmin_lcb(&self, pool: &[Configuration], kappa: f64) -> Result<usize> {
        if pool.is_empty() {
            return Err(Error::InvalidArgument("empty candidate pool".into()));
        }
        let Some(forest) = &self.forest else { return Ok(0) };
        let mut flat = Vec::with_capacity(pool.len() * self.space.dim());
        for c in pool {
            self.space.encode_into(c, &mut flat)?;
        }
        let preds = forest.predict_batch(&flat)?;
        let mut best = 0;
        let mut best_val = f64::INFINITY;
        for (i, (mu, sigma)) in preds.into_iter().enumerate() {
            let v = mu - kappa * sigma;
            if v < best_val {
                best_val = v;
                best = i;
            }
        }
        Ok(best)
    }

    /// Pareto front of the raw finite objective vectors observed so far.
    pub fn pareto_archive(&self) -> Vec<Vec<f64>> {
        let finite: Vec<&[f64]> = self.outcomes.iter().filter_map(Outcome::finite).collect();
        extract_pareto_front(&finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicators::pareto_indices;
    use crate::space::{ParamValue, ParameterSpec};
    use proptest::prelude::*;
    use rand::Rng;

    fn unit(dim: usize) -> Arc<SearchSpace> {
        Arc::new(SearchSpace::unit_cube(dim).unwrap())
    }

    fn x(v: f64) -> Configuration {
        Configuration::new(vec![("x0".into(), ParamValue::Real(v))])
    }

    #[test]
    fn penalty_arithmetic() {
        let p = penalize(&[vec![0.9, 0.3]], &[0.6, 1.0], 2.0);
        assert!((p[0][0] - 1.5).abs() < 1e-12 && (p[0][1] - 0.9).abs() < 1e-12);
        assert_eq!(penalize(&[vec![0.5, 0.3]], &[0.6, 1.0], 2.0), vec![vec![0.5, 0.3]]);
    }

    #[test]
    fn no_bounds_skips_penalty() {
        let outs = vec![Outcome::Objectives(vec![1.0, 5.0]), Outcome::Objectives(vec![2.0, 3.0])];
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let b = scalarize_observations(&outs, TransformKind::QuantileUniform, None, 2.0, &Scalarization::Linear, w)
            .unwrap();
        assert_eq!(b.normalized, b.penalized);
        assert!(b.bounds_normalized.is_none());
    }

    #[test]
    fn failure_imputed_with_max() {
        let outs = vec![Outcome::Objectives(vec![0.1, 0.1]), Outcome::failure("crash")];
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let b = scalarize_observations(&outs, TransformKind::QuantileUniform, None, 2.0, &Scalarization::Linear, w)
            .unwrap();
        // single finite row maps to (1, 1), scalar 1
        assert_eq!(b.normalized, vec![vec![1.0, 1.0]]);
        assert_eq!(b.targets, vec![Some(1.0), Some(1.0)]);
    }

    #[test]
    fn penalty_only_with_quantile_transform() {
        let outs = vec![Outcome::Objectives(vec![0.9, 0.3]), Outcome::Objectives(vec![0.1, 0.8])];
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let ub = [0.5, 1.0];
        let b = scalarize_observations(&outs, TransformKind::Identity, Some(&ub), 2.0, &Scalarization::Linear, w.clone())
            .unwrap();
        assert_eq!(b.normalized, b.penalized);
        let q = scalarize_observations(&outs, TransformKind::QuantileUniform, Some(&ub), 2.0, &Scalarization::Linear, w)
            .unwrap();
        // 0.5 sits halfway between the samples 0.1 and 0.9
        assert_eq!(q.bounds_normalized, Some(vec![0.75, 1.0]));
        // first row: yu = (1.0, 0.5), violation 0.25 -> +0.5
        assert_eq!(q.penalized[0], vec![1.5, 1.0]);
        assert_eq!(q.penalized[1], q.normalized[1]);
    }

    #[test]
    fn infinite_bounds_change_nothing() {
        let outs: Vec<Outcome> = (0..12)
            .map(|i| Outcome::Objectives(vec![(i as f64 * 0.37) % 1.0, (i as f64 * 0.71) % 1.3]))
            .collect();
        let w = WeightVector::new(vec![0.3, 0.7]).unwrap();
        let ub = [f64::INFINITY, f64::INFINITY];
        let with = scalarize_observations(&outs, TransformKind::QuantileUniform, Some(&ub), 2.0, &Scalarization::Linear, w.clone())
            .unwrap();
        let without = scalarize_observations(&outs, TransformKind::QuantileUniform, None, 2.0, &Scalarization::Linear, w)
            .unwrap();
        assert_eq!(with.targets, without.targets);
    }

    #[test]
    fn all_failures_leave_forest_untrained() {
        let mut m = Mobo::new(unit(1), MoboConfig { n_initial: 1, ..MoboConfig::new(2) }, 1).unwrap();
        m.observe(vec![x(0.2), x(0.4)], vec![Outcome::failure("a"), Outcome::failure("b")]).unwrap();
        assert!(m.forest().is_none());
        let c = m.suggest(1.0).unwrap();
        assert!(m.space().contains(&c));
    }

    #[test]
    fn observe_checks_lengths() {
        let mut m = Mobo::new(unit(1), MoboConfig::new(2), 1).unwrap();
        assert!(m.observe(vec![x(0.2)], vec![]).is_err());
        assert!(m.observe(vec![x(0.2)], vec![Outcome::Objectives(vec![1.0])]).is_err());
        assert!(m.is_empty());
    }

    #[test]
    fn fresh_state_samples_randomly() {
        let mut m = Mobo::new(unit(2), MoboConfig { n_initial: 10, ..MoboConfig::new(2) }, 7).unwrap();
        let c = m.suggest(1.96).unwrap();
        assert!(m.space().contains(&c));
        assert!(m.forest().is_none());
    }

    #[test]
    fn forest_not_consulted_before_n_initial() {
        let cfg = MoboConfig { n_initial: 10, ..MoboConfig::new(2) };
        let mut a = Mobo::new(unit(2), cfg.clone(), 3).unwrap();
        let mut b = Mobo::new(unit(2), cfg, 3).unwrap();
        for i in 0..6 {
            let ca = a.suggest(1.0).unwrap();
            let cb = b.suggest(1.0).unwrap();
            assert_eq!(ca, cb);
            let v = i as f64 / 6.0;
            a.observe(vec![ca], vec![Outcome::Objectives(vec![v, 1.0 - v])]).unwrap();
            b.observe(vec![cb], vec![Outcome::Objectives(vec![v, 1.0 - v])]).unwrap();
            b.clear_forest();
        }
        assert_eq!(a.suggest(2.0).unwrap(), b.suggest(2.0).unwrap());
    }

    #[test]
    fn exploitation_picks_lowest_mean_on_grid() {
        // single objective s(x) = x; forest trained on 0.1..0.9
        let cfg = MoboConfig {
            n_initial: 1,
            n_objectives: 1,
            transform: TransformKind::Identity,
            ..Default::default()
        };
        let mut m = Mobo::new(unit(1), cfg, 11).unwrap();
        let xs: Vec<Configuration> = (1..10).map(|i| x(i as f64 / 10.0)).collect();
        let ys = xs.iter().map(|c| Outcome::Objectives(vec![c.real("x0").unwrap()])).collect();
        m.observe(xs, ys).unwrap();
        let grid: Vec<Configuration> = (0..=100).map(|i| x(i as f64 / 100.0)).collect();
        let best = m.argmin_lcb(&grid, 0.0).unwrap();
        let chosen = grid[best].real("x0").unwrap();
        assert!(chosen <= 0.15, "chose {chosen}");
        // oracle: the chosen mean is the minimum of the forest's means on the grid
        let forest = m.forest().unwrap();
        let means: Vec<f64> = grid.iter().map(|c| forest.predict(&[c.real("x0").unwrap()]).unwrap().0).collect();
        let min = means.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(means[best], min);
        assert_eq!(means.iter().position(|&v| v == min), Some(best));
    }

    #[test]
    fn suggest_is_deterministic() {
        let run = || {
            let mut m = Mobo::new(unit(3), MoboConfig { n_initial: 3, pool_size: 256, ..MoboConfig::new(2) }, 99).unwrap();
            let mut out = Vec::new();
            for _ in 0..8 {
                let c = m.suggest(1.0).unwrap();
                let e = m.space().encode(&c).unwrap();
                m.observe(vec![c.clone()], vec![Outcome::Objectives(vec![e[0] + e[1], 1.0 - e[0] + e[2]])]).unwrap();
                out.push(c);
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn pareto_archive_examples() {
        let mut m = Mobo::new(unit(1), MoboConfig::new(2), 0).unwrap();
        m.observe(vec![x(0.1)], vec![Outcome::Objectives(vec![0.5, 0.5])]).unwrap();
        assert_eq!(m.pareto_archive(), vec![vec![0.5, 0.5]]);
        let mut m = Mobo::new(unit(1), MoboConfig::new(2), 0).unwrap();
        m.observe(
            vec![x(0.1), x(0.2), x(0.3), x(0.4)],
            vec![
                Outcome::Objectives(vec![0.0, 1.0]),
                Outcome::Objectives(vec![1.0, 0.0]),
                Outcome::Objectives(vec![2.0, 2.0]),
                Outcome::failure("x"),
            ],
        )
        .unwrap();
        assert_eq!(m.pareto_archive(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let empty = Mobo::new(unit(1), MoboConfig::new(2), 0).unwrap();
        assert!(empty.pareto_archive().is_empty());
    }

    #[test]
    fn pareto_archive_matches_bruteforce() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut m = Mobo::new(unit(1), MoboConfig { pool_size: 16, ..MoboConfig::new(3) }, 0).unwrap();
        let ys: Vec<Vec<f64>> = (0..100).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let xs = (0..100).map(|i| x(i as f64 / 100.0)).collect();
        m.observe(xs, ys.iter().cloned().map(Outcome::Objectives).collect()).unwrap();
        let oracle: Vec<Vec<f64>> = (0..ys.len())
            .filter(|&i| !ys.iter().any(|o| crate::indicators::dominates(o, &ys[i]).unwrap()))
            .map(|i| ys[i].clone())
            .collect();
        assert_eq!(m.pareto_archive(), oracle);
    }

    #[test]
    fn mixed_space_round() {
        let space = Arc::new(
            SearchSpace::new(vec![
                ParameterSpec::continuous("a", 0.0, 1.0).unwrap(),
                ParameterSpec::categorical("c", ["p", "q", "r"]).unwrap(),
            ])
            .unwrap(),
        );
        let mut m = Mobo::new(space.clone(), MoboConfig { n_initial: 2, pool_size: 64, ..MoboConfig::new(2) }, 5).unwrap();
        for _ in 0..6 {
            let c = m.suggest(1.0).unwrap();
            assert!(space.contains(&c));
            let a = c.real("a").unwrap();
            let bonus = if c.get("c").and_then(|v| v.as_str()) == Some("q") { 0.0 } else { 0.5 };
            m.observe(vec![c], vec![Outcome::Objectives(vec![a + bonus, 1.0 - a])]).unwrap();
        }
    }

    fn tied_rows() -> impl Strategy<Value = Vec<Vec<f64>>> {
        let v = prop_oneof![(0u8..4).prop_map(|v| v as f64), (-3i32..4, 1.0f64..9.0).prop_map(|(e, m)| m * 10f64.powi(e))];
        proptest::collection::vec(proptest::collection::vec(v, 3), 1..30)
    }

    proptest! {
        #[test]
        fn penalty_never_decreases(rows in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 3), 1..20),
                                   ub in proptest::collection::vec(0.0f64..1.0, 3)) {
            let p = penalize(&rows, &ub, 2.0);
            for (a, b) in rows.iter().zip(&p) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert!(y >= x);
                }
            }
        }

        #[test]
        fn quantile_path_keeps_pareto_subset(rows in tied_rows()) {
            let outs: Vec<Outcome> = rows.iter().cloned().map(Outcome::Objectives).collect();
            let w = WeightVector::new(vec![0.2, 0.3, 0.5]).unwrap();
            let b = scalarize_observations(&outs, TransformKind::QuantileUniform, None, 2.0, &Scalarization::Linear, w).unwrap();
            prop_assert_eq!(pareto_indices(&rows), pareto_indices(&b.normalized));
        }
    }
}

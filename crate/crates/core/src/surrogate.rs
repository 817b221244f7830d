//! Random-split regression forest used as the optimizer's surrogate.
//!
//! Each tree is grown on an optional bootstrap resample. At every node a
//! random subset of features is drawn, each gets one uniformly random
//! threshold inside its node-local range, and the candidate with the lowest
//! summed child squared error wins. Growth stops when a node holds fewer
//! than `min_samples_split` samples or its targets are constant.
//!
//! Predictions report the mean of the per-tree outputs and their population
//! standard deviation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub min_samples_split: usize,
    /// Fraction of features examined at each split, in `(0, 1]`.
    pub max_features: f64,
    pub bootstrap: bool,
    pub rng_seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, min_samples_split: 2, max_features: 1.0, bootstrap: true, rng_seed: 0 }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidArgument("n_trees must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidArgument("min_samples_split must be at least 2".into()));
        }
        if !(self.max_features > 0.0 && self.max_features <= 1.0) {
            return Err(Error::InvalidArgument("max_features must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

const LEAF: u32 = u32::MAX;

/// Internal nodes keep their threshold in `x` and their children at
/// `left` and `left + 1`; leaves keep their prediction in `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Node {
    feature: u32,
    left: u32,
    x: f64,
}

impl Node {
    fn leaf(value: f64) -> Self {
        Node { feature: LEAF, left: 0, x: value }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    #[inline]
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.feature == LEAF {
                return n.x;
            }
            i = n.left as usize + usize::from(x[n.feature as usize] > n.x);
        }
    }

    fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            let n = &nodes[i];
            if n.feature == LEAF {
                1
            } else {
                1 + go(nodes, n.left as usize).max(go(nodes, n.left as usize + 1))
            }
        }
        go(&self.nodes, 0)
    }
}

/// Column-major copy of the training inputs.
struct Columns<'a> {
    data: Vec<f64>,
    n: usize,
    targets: &'a [f64],
}

impl Columns<'_> {
    #[inline]
    fn at(&self, feature: usize, row: usize) -> f64 {
        self.data[feature * self.n + row]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionForest {
    trees: Vec<Tree>,
    dim: usize,
}

impl RegressionForest {
    pub fn train<X: AsRef<[f64]>>(cfg: &ForestConfig, inputs: &[X], targets: &[f64]) -> Result<Self> {
        cfg.validate()?;
        if inputs.is_empty() {
            return Err(Error::CannotTrain("no training data"));
        }
        check_len(inputs.len(), targets.len())?;
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::CannotTrain("non-finite target"));
        }
        let dim = inputs[0].as_ref().len();
        let n = inputs.len();
        let mut data = vec![0.0; dim * n];
        for (row, x) in inputs.iter().enumerate() {
            let x = x.as_ref();
            check_len(dim, x.len())?;
            for (f, &v) in x.iter().enumerate() {
                data[f * n + row] = v;
            }
        }
        let cols = Columns { data, n, targets };
        let k = ((cfg.max_features * dim as f64).ceil() as usize).clamp(1, dim.max(1));
        let mut seeder = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let seeds: Vec<u64> = (0..cfg.n_trees).map(|_| seeder.random()).collect();
        let trees = seeds
            .into_iter()
            .map(|seed| grow(&cols, dim, k, cfg, &mut ChaCha8Rng::seed_from_u64(seed)))
            .collect();
        Ok(Self { trees, dim })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }

    pub fn predict_trees(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, x.len())?;
        Ok(self.trees.iter().map(|t| t.predict(x)).collect())
    }

    /// `(mean, std)` over the trees.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        Ok(mean_std(&self.predict_trees(x)?))
    }

    /// Predictions for `rows` stacked row-major in `flat`.
    pub fn predict_batch(&self, flat: &[f64]) -> Result<Vec<(f64, f64)>> {
        if self.dim == 0 || !flat.len().is_multiple_of(self.dim) {
            return Err(Error::LengthMismatch { expected: self.dim, actual: flat.len() });
        }
        let rows = flat.len() / self.dim;
        let mut sum = vec![0.0; rows];
        let mut sum_sq = vec![0.0; rows];
        // tree-major keeps one tree hot in cache
        const LANES: usize = 8;
        for tree in &self.trees {
            let mut start = 0;
            while start < rows {
                let lanes = LANES.min(rows - start);
                if lanes < LANES {
                    for r in start..rows {
                        let v = tree.predict(&flat[r * self.dim..(r + 1) * self.dim]);
                        sum[r] += v;
                        sum_sq[r] += v * v;
                    }
                    break;
                }
                // walk several rows in lockstep so their memory loads overlap
                let mut at = [0usize; LANES];
                let mut active = LANES;
                while active > 0 {
                    active = 0;
                    for (l, i) in at.iter_mut().enumerate() {
                        let n = &tree.nodes[*i];
                        if n.feature != LEAF {
                            let x = flat[(start + l) * self.dim + n.feature as usize];
                            *i = n.left as usize + usize::from(x > n.x);
                            active += 1;
                        }
                    }
                }
                for (l, &i) in at.iter().enumerate() {
                    let v = tree.nodes[i].x;
                    sum[start + l] += v;
                    sum_sq[start + l] += v * v;
                }
                start += LANES;
            }
        }
        let t = self.trees.len() as f64;
        Ok(sum
            .into_iter()
            .zip(sum_sq)
            .map(|(s, q)| {
                let mu = s / t;
                (mu, (q / t - mu * mu).max(0.0).sqrt())
            })
            .collect())
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if let Some(&first) = values.first() {
        if values.iter().all(|&v| v == first) {
            return (first, 0.0);
        }
    }
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
    (mu, var.sqrt())
}

fn grow(cols: &Columns<'_>, dim: usize, k: usize, cfg: &ForestConfig, rng: &mut ChaCha8Rng) -> Tree {
    let n = cols.n;
    let mut idx: Vec<usize> = if cfg.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut nodes = vec![Node::leaf(0.0)];
    let mut stack = vec![(0usize, 0usize, idx.len())];
    let mut features: Vec<usize> = (0..dim).collect();

    while let Some((node, lo, hi)) = stack.pop() {
        let rows = &mut idx[lo..hi];
        let count = rows.len();
        let mean = rows.iter().map(|&r| cols.targets[r]).sum::<f64>() / count as f64;
        let first = cols.targets[rows[0]];
        let constant = rows.iter().all(|&r| cols.targets[r] == first);
        if count < cfg.min_samples_split || constant {
            nodes[node] = Node::leaf(if constant { first } else { mean });
            continue;
        }

        features.shuffle(rng);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut tried = 0;
        for &f in features.iter() {
            if tried == k {
                break;
            }
            let (mut fmin, mut fmax) = (f64::INFINITY, f64::NEG_INFINITY);
            for &r in rows.iter() {
                let v = cols.at(f, r);
                fmin = fmin.min(v);
                fmax = fmax.max(v);
            }
            if fmin >= fmax {
                continue;
            }
            tried += 1;
            let t = rng.random_range(fmin..fmax);
            let (mut ls, mut lq, mut lc, mut rs, mut rq) = (0.0, 0.0, 0usize, 0.0, 0.0);
            for &r in rows.iter() {
                let y = cols.targets[r];
                if cols.at(f, r) <= t {
                    ls += y;
                    lq += y * y;
                    lc += 1;
                } else {
                    rs += y;
                    rq += y * y;
                }
            }
            let rc = count - lc;
            let sse = (lq - ls * ls / lc as f64) + (rq - rs * rs / rc as f64);
            if best.is_none_or(|(b, _, _)| sse < b) {
                best = Some((sse, f, t));
            }
        }

        let Some((_, f, t)) = best else {
            nodes[node] = Node::leaf(mean);
            continue;
        };
        // partition rows so that x[f] <= t comes first
        let mut split = 0;
        for i in 0..count {
            if cols.at(f, rows[i]) <= t {
                rows.swap(i, split);
                split += 1;
            }
        }
        let left = nodes.len();
        nodes.push(Node::leaf(0.0));
        nodes.push(Node::leaf(0.0));
        nodes[node] = Node { feature: f as u32, left: left as u32, x: t };
        stack.push((left + 1, lo + split, hi));
        stack.push((left, lo, lo + split));
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn single_sample() {
        let f = RegressionForest::train(&ForestConfig::default(), &[vec![0.3, 0.7]], &[3.7]).unwrap();
        let (mu, sigma) = f.predict(&[0.3, 0.7]).unwrap();
        assert_eq!(mu, 3.7);
        assert_eq!(sigma, 0.0);
        assert_eq!(f.predict(&[9.0, -1.0]).unwrap(), (3.7, 0.0));
    }

    #[test]
    fn constant_targets() {
        let xs: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 30.0, (i * 7 % 11) as f64]).collect();
        let f = RegressionForest::train(&ForestConfig::default(), &xs, &[2.5; 30]).unwrap();
        for x in [[0.1, 3.0], [0.9, 10.0], [-5.0, 50.0]] {
            assert_eq!(f.predict(&x).unwrap(), (2.5, 0.0));
        }
    }

    #[test]
    fn two_tree_aggregate() {
        let f = RegressionForest {
            trees: vec![Tree { nodes: vec![Node::leaf(1.0)] }, Tree { nodes: vec![Node::leaf(3.0)] }],
            dim: 1,
        };
        assert_eq!(f.predict(&[0.0]).unwrap(), (2.0, 1.0));
        assert_eq!(f.predict_batch(&[0.0, 5.0]).unwrap(), vec![(2.0, 1.0), (2.0, 1.0)]);
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
    }

    #[test]
    fn errors() {
        let cfg = ForestConfig::default();
        assert!(matches!(RegressionForest::train::<Vec<f64>>(&cfg, &[], &[]), Err(Error::CannotTrain(_))));
        assert!(RegressionForest::train(&cfg, &[vec![1.0]], &[f64::NAN]).is_err());
        assert!(RegressionForest::train(&cfg, &[vec![1.0], vec![2.0]], &[1.0]).is_err());
        let f = RegressionForest::train(&cfg, &[vec![1.0]], &[1.0]).unwrap();
        assert!(matches!(f.predict(&[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        for bad in [
            ForestConfig { n_trees: 0, ..cfg.clone() },
            ForestConfig { min_samples_split: 1, ..cfg.clone() },
            ForestConfig { max_features: 0.0, ..cfg.clone() },
            ForestConfig { max_features: 1.5, ..cfg.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn learns_parabola() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0] * x[0]).collect();
        let f = RegressionForest::train(&ForestConfig { rng_seed: 1, ..Default::default() }, &xs, &ys).unwrap();
        let grid: Vec<f64> = (0..101).map(|i| -0.99 + 1.98 * i as f64 / 100.0).collect();
        let mae = grid.iter().map(|&x| (f.predict(&[x]).unwrap().0 - x * x).abs()).sum::<f64>() / grid.len() as f64;
        assert!(mae < 0.05, "mae {mae}");
    }

    #[test]
    fn batch_matches_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let xs: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random(), rng.random()]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0] - 2.0 * x[1]).collect();
        let f = RegressionForest::train(&ForestConfig::default(), &xs, &ys).unwrap();
        let q: Vec<f64> = (0..20).flat_map(|i| [i as f64 / 20.0, 1.0 - i as f64 / 20.0]).collect();
        let batch = f.predict_batch(&q).unwrap();
        for (row, (bm, bs)) in q.chunks(2).zip(batch) {
            let (m, s) = f.predict(row).unwrap();
            assert!((m - bm).abs() < 1e-12 && (s - bs).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn predictions_within_target_range(
            data in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, -5.0f64..5.0), 1..40),
            q in proptest::collection::vec(-0.5f64..1.5, 2),
            seed in any::<u64>(),
        ) {
            let xs: Vec<Vec<f64>> = data.iter().map(|(a, b, _)| vec![*a, *b]).collect();
            let ys: Vec<f64> = data.iter().map(|d| d.2).collect();
            let cfg = ForestConfig { n_trees: 10, rng_seed: seed, ..Default::default() };
            let f = RegressionForest::train(&cfg, &xs, &ys).unwrap();
            let (mu, sigma) = f.predict(&q).unwrap();
            let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(mu >= lo - 1e-9 && mu <= hi + 1e-9);
            prop_assert!(sigma >= 0.0);
            let again = RegressionForest::train(&cfg, &xs, &ys).unwrap();
            prop_assert_eq!(&f, &again);
        }

        #[test]
        fn interpolates_without_bootstrap(
            data in proptest::collection::vec((0u8..50, 0u8..50, -5.0f64..5.0), 1..30),
            seed in any::<u64>(),
        ) {
            let mut xs: Vec<Vec<f64>> = Vec::new();
            let mut ys = Vec::new();
            for (a, b, y) in data {
                let x = vec![a as f64, b as f64];
                if !xs.contains(&x) {
                    xs.push(x);
                    ys.push(y);
                }
            }
            let cfg = ForestConfig { n_trees: 5, bootstrap: false, rng_seed: seed, ..Default::default() };
            let f = RegressionForest::train(&cfg, &xs, &ys).unwrap();
            for (x, y) in xs.iter().zip(&ys) {
                let (mu, sigma) = f.predict(x).unwrap();
                prop_assert!((mu - y).abs() < 1e-12);
                prop_assert!(sigma < 1e-9);
            }
        }
    }
}

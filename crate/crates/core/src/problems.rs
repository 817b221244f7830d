//! Benchmark black boxes: the DTLZ 1-7 suite and a synthetic mixed-space
//! tuning problem with heavy-tailed runtimes and hidden failures.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::extract_pareto_front;
use crate::outcome::Outcome;
use crate::space::{Configuration, ParamValue, ParameterSpec, Prior, SearchSpace};

/// Pathologies a benchmark exhibits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Property {
    /// Local Pareto-optimal fronts.
    P1,
    /// Non-convex front.
    P2,
    /// Degenerate front.
    P3,
    /// Non-uniform density on the front.
    P4,
    /// Disjoint front.
    P5,
}

/// Serializable problem selector used by experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ProblemSpec {
    Dtlz1 { #[serde(default = "default_vars")] n_vars: usize, #[serde(default = "default_objs")] n_objectives: usize },
    Dtlz2 { #[serde(default = "default_vars")] n_vars: usize, #[serde(default = "default_objs")] n_objectives: usize },
    Dtlz3 { #[serde(default = "default_vars")] n_vars: usize, #[serde(default = "default_objs")] n_objectives: usize },
    Dtlz4 { #[serde(default = "default_vars")] n_vars: usize, #[serde(default = "default_objs")] n_objectives: usize },
    Dtlz5 { #[serde(default = "default_vars")] n_vars: usize, #[serde(default = "default_objs")] n_objectives: usize },
    Dtlz6 { #[serde(default = "default_vars")] n_vars: usize, #[serde(default = "default_objs")] n_objectives: usize },
    Dtlz7 { #[serde(default = "default_vars")] n_vars: usize, #[serde(default = "default_objs")] n_objectives: usize },
    SyntheticHpo { #[serde(default)] seed: u64 },
}

fn default_vars() -> usize {
    8
}

fn default_objs() -> usize {
    3
}

impl ProblemSpec {
    pub fn dtlz(k: u8, n_vars: usize, n_objectives: usize) -> Result<Self> {
        Ok(match k {
            1 => ProblemSpec::Dtlz1 { n_vars, n_objectives },
            2 => ProblemSpec::Dtlz2 { n_vars, n_objectives },
            3 => ProblemSpec::Dtlz3 { n_vars, n_objectives },
            4 => ProblemSpec::Dtlz4 { n_vars, n_objectives },
            5 => ProblemSpec::Dtlz5 { n_vars, n_objectives },
            6 => ProblemSpec::Dtlz6 { n_vars, n_objectives },
            7 => ProblemSpec::Dtlz7 { n_vars, n_objectives },
            _ => return Err(Error::Config(format!("unknown DTLZ variant {k}"))),
        })
    }

    pub fn build(&self) -> Result<ProblemInstance> {
        match *self {
            ProblemSpec::Dtlz1 { n_vars, n_objectives } => dtlz(1, n_vars, n_objectives),
            ProblemSpec::Dtlz2 { n_vars, n_objectives } => dtlz(2, n_vars, n_objectives),
            ProblemSpec::Dtlz3 { n_vars, n_objectives } => dtlz(3, n_vars, n_objectives),
            ProblemSpec::Dtlz4 { n_vars, n_objectives } => dtlz(4, n_vars, n_objectives),
            ProblemSpec::Dtlz5 { n_vars, n_objectives } => dtlz(5, n_vars, n_objectives),
            ProblemSpec::Dtlz6 { n_vars, n_objectives } => dtlz(6, n_vars, n_objectives),
            ProblemSpec::Dtlz7 { n_vars, n_objectives } => dtlz(7, n_vars, n_objectives),
            ProblemSpec::SyntheticHpo { seed } => Ok(synthetic_hpo(seed)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Dtlz { k: u8 },
    SyntheticHpo(SyntheticHpo),
}

/// A named black box over a search space.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    name: String,
    space: Arc<SearchSpace>,
    n_objectives: usize,
    kind: Kind,
    properties: Vec<Property>,
}

impl fmt::Display for ProblemInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl ProblemInstance {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &Arc<SearchSpace> {
        &self.space
    }

    pub fn n_objectives(&self) -> usize {
        self.n_objectives
    }

    pub fn properties(&self) -> &[Property] {
        &self.properties
    }

    pub fn has_true_front(&self) -> bool {
        matches!(self.kind, Kind::Dtlz { .. })
    }

    pub fn evaluate(&self, config: &Configuration) -> Outcome {
        match &self.kind {
            Kind::Dtlz { k } => match self.space.encode(config) {
                Ok(x) => Outcome::checked(dtlz_eval(*k, &x, self.n_objectives)),
                Err(e) => Outcome::failure(e.to_string()),
            },
            Kind::SyntheticHpo(p) => p.evaluate(config),
        }
    }

    /// Samples of the analytic Pareto front, mutually non-dominated.
    /// `None` for problems without a known front.
    pub fn true_front<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<Vec<f64>>> {
        let Kind::Dtlz { k } = self.kind else { return None };
        let m = self.n_objectives;
        let pts = match k {
            1 => (0..n)
                .map(|_| {
                    let e: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
                    let s: f64 = e.iter().sum();
                    e.into_iter().map(|v| 0.5 * v / s).collect()
                })
                .collect(),
            2..=4 => (0..n)
                .map(|_| {
                    let g: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).map(|v: f64| v.abs()).collect();
                    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                    g.into_iter().map(|v| v / norm).collect()
                })
                .collect(),
            5 | 6 => (0..n)
                .map(|_| {
                    let mut theta = vec![PI / 4.0; m - 1];
                    theta[0] = rng.random::<f64>() * PI / 2.0;
                    sphere_from_angles(&theta, 1.0)
                })
                .collect(),
            7 => {
                let cand: Vec<Vec<f64>> = (0..4 * n.max(1))
                    .map(|_| {
                        let mut f: Vec<f64> = (0..m - 1).map(|_| rng.random::<f64>()).collect();
                        f.push(dtlz7_last(&f, 1.0, m));
                        f
                    })
                    .collect();
                let mut front = extract_pareto_front(&cand);
                front.truncate(n);
                front
            }
            _ => unreachable!("validated at construction"),
        };
        Some(pts)
    }
}

/// DTLZ problem `k` over `[0, 1]^n_vars` with `n_objectives` objectives.
pub fn dtlz(k: u8, n_vars: usize, n_objectives: usize) -> Result<ProblemInstance> {
    if !(1..=7).contains(&k) {
        return Err(Error::Config(format!("unknown DTLZ variant {k}")));
    }
    if n_objectives < 2 || n_vars < n_objectives {
        return Err(Error::InvalidArgument(format!(
            "DTLZ needs 2 <= n_objectives <= n_vars, got {n_objectives} objectives and {n_vars} variables"
        )));
    }
    use Property::*;
    let properties = match k {
        1 => vec![P1],
        2 => vec![P2],
        3 => vec![P1, P2],
        4 => vec![P2, P4],
        5 | 6 => vec![P3],
        _ => vec![P2, P5],
    };
    Ok(ProblemInstance {
        name: format!("dtlz{k}"),
        space: Arc::new(SearchSpace::unit_cube(n_vars)?),
        n_objectives,
        kind: Kind::Dtlz { k },
        properties,
    })
}

fn sphere_from_angles(theta: &[f64], radius: f64) -> Vec<f64> {
    let m = theta.len() + 1;
    (0..m)
        .map(|i| {
            let mut f = radius;
            for t in &theta[..m - 1 - i] {
                f *= t.cos();
            }
            if i > 0 {
                f *= theta[m - 1 - i].sin();
            }
            f
        })
        .collect()
}

fn dtlz7_last(head: &[f64], g: f64, m: usize) -> f64 {
    let h = m as f64 - head.iter().map(|f| f / (1.0 + g) * (1.0 + (3.0 * PI * f).sin())).sum::<f64>();
    (1.0 + g) * h
}

fn rastrigin_g(tail: &[f64]) -> f64 {
    100.0 * (tail.len() as f64 + tail.iter().map(|x| (x - 0.5).powi(2) - (20.0 * PI * (x - 0.5)).cos()).sum::<f64>())
}

fn sphere_g(tail: &[f64]) -> f64 {
    tail.iter().map(|x| (x - 0.5).powi(2)).sum()
}

/// Standard DTLZ objective functions.
pub fn dtlz_eval(k: u8, x: &[f64], m: usize) -> Vec<f64> {
    let (head, tail) = x.split_at(m - 1);
    match k {
        1 => {
            let g = rastrigin_g(tail);
            (0..m)
                .map(|i| {
                    let mut f = 0.5 * (1.0 + g);
                    for v in &head[..m - 1 - i] {
                        f *= v;
                    }
                    if i > 0 {
                        f *= 1.0 - head[m - 1 - i];
                    }
                    f
                })
                .collect()
        }
        2..=4 => {
            let g = if k == 3 { rastrigin_g(tail) } else { sphere_g(tail) };
            let alpha = if k == 4 { 100.0 } else { 1.0 };
            let theta: Vec<f64> = head.iter().map(|v| v.powf(alpha) * PI / 2.0).collect();
            sphere_from_angles(&theta, 1.0 + g)
        }
        5 | 6 => {
            let g = if k == 5 { sphere_g(tail) } else { tail.iter().map(|v| v.powf(0.1)).sum() };
            let theta: Vec<f64> = head
                .iter()
                .enumerate()
                .map(|(i, v)| if i == 0 { v * PI / 2.0 } else { PI / (4.0 * (1.0 + g)) * (1.0 + 2.0 * g * v) })
                .collect();
            sphere_from_angles(&theta, 1.0 + g)
        }
        7 => {
            let g = 1.0 + 9.0 / tail.len() as f64 * tail.iter().sum::<f64>();
            let mut f = head.to_vec();
            f.push(dtlz7_last(head, g, m));
            f
        }
        _ => panic!("unknown DTLZ variant {k}"),
    }
}

/// Failure rate of the synthetic tuning problem.
pub const SYNTHETIC_FAILURE_RATE: f64 = 0.02;

const ACTIVATIONS: [&str; 4] = ["relu", "tanh", "sigmoid", "linear"];

#[derive(Clone, Debug, PartialEq)]
struct SyntheticHpo {
    seed: u64,
    lr_opt: f64,
    dropout_opt: f64,
    act_offset: [f64; 4],
}

impl SyntheticHpo {
    fn new(seed: u64) -> Self {
        let mut h = splitmix(seed ^ 0x005e_ed0f_4a11);
        let mut next = || {
            h = splitmix(h);
            unit_from_bits(h)
        };
        let lr_opt = -2.5 + 0.6 * (next() - 0.5);
        let dropout_opt = 0.1 + 0.2 * next();
        let mut act_offset = [0.0, 0.05, 0.15, 0.3];
        // rotate which activation is best
        let shift = (next() * 4.0) as usize % 4;
        act_offset.rotate_left(shift);
        Self { seed, lr_opt, dropout_opt, act_offset }
    }

    fn evaluate(&self, config: &Configuration) -> Outcome {
        let (Some(lr), Some(dropout), Some(units), Some(act)) = (
            config.real("learning_rate"),
            config.real("dropout"),
            config.real("units"),
            config.get("activation").and_then(ParamValue::as_str),
        ) else {
            return Outcome::failure("configuration does not match the synthetic space");
        };
        let Some(a) = ACTIVATIONS.iter().position(|c| *c == act) else {
            return Outcome::failure(format!("unknown activation {act}"));
        };
        let h = config_hash(config, self.seed);
        if unit_from_bits(splitmix(h ^ 0xfa11)) < SYNTHETIC_FAILURE_RATE {
            return Outcome::failure("training diverged");
        }

        let u = (lr.log10() - self.lr_opt) / 1.5;
        let d = (dropout - self.dropout_opt) / 0.4;
        let s = (units / 8.0).log2() / 7.0;
        let base = u * u + 0.1 * (1.0 - (3.0 * PI * u).cos()) + 0.5 * d * d + 0.6 * (1.0 - s).powi(2)
            + self.act_offset[a];
        let loss = base / (1.0 + base);

        // standard normal from two hashed uniforms
        let u1 = unit_from_bits(splitmix(h ^ 0x0123_4567)).max(f64::MIN_POSITIVE);
        let u2 = unit_from_bits(splitmix(h ^ 0x89ab_cdef));
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos();
        let act_cost = [1.0, 1.4, 1.6, 0.8][a];
        let runtime = (units / 8.0) * act_cost * (1.0 + dropout) * (1.2 * z).exp();
        Outcome::Objectives(vec![loss, runtime])
    }
}

/// Mixed-space stand-in for a tuning task: objective 1 is a smooth
/// multimodal validation loss in `[0, 1)`, objective 2 a heavy-tailed
/// runtime. About 2% of configurations fail deterministically.
pub fn synthetic_hpo(seed: u64) -> ProblemInstance {
    let space = SearchSpace::new(vec![
        ParameterSpec::log_uniform("learning_rate", 1e-4, 1e-1).expect("valid"),
        ParameterSpec::continuous("dropout", 0.0, 0.6).expect("valid"),
        ParameterSpec::integer("units", 8, 1024, Prior::LogUniform).expect("valid"),
        ParameterSpec::categorical("activation", ACTIVATIONS).expect("valid"),
    ])
    .expect("valid");
    ProblemInstance {
        name: "synthetic_hpo".into(),
        space: Arc::new(space),
        n_objectives: 2,
        kind: Kind::SyntheticHpo(SyntheticHpo::new(seed)),
        properties: vec![],
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn unit_from_bits(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn config_hash(config: &Configuration, seed: u64) -> u64 {
    let mut h = splitmix(seed);
    for (name, v) in &config.values {
        for b in name.bytes() {
            h = splitmix(h ^ b as u64);
        }
        h = match v {
            ParamValue::Int(i) => splitmix(h ^ *i as u64),
            ParamValue::Real(r) => splitmix(h ^ r.to_bits()),
            ParamValue::Category(c) => c.bytes().fold(splitmix(h ^ 0xca7), |h, b| splitmix(h ^ b as u64)),
        };
    }
    h
}

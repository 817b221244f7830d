//! Scalarization of objective vectors and random simplex weights.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Nonnegative weights summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Self(w))
    }

    /// `w_i = log(1 - u_i) / sum_j log(1 - u_j)` for `u` in `[0, 1)`.
    pub fn from_uniforms(u: &[f64]) -> Result<Self> {
        if u.is_empty() || u.iter().any(|v| !(0.0..1.0).contains(v)) {
            return Err(Error::InvalidArgument("uniforms must lie in [0, 1)".into()));
        }
        let logs: Vec<f64> = u.iter().map(|v| (1.0 - v).ln()).collect();
        let total: f64 = logs.iter().sum();
        if total == 0.0 {
            return Err(Error::InvalidArgument("all uniforms are zero".into()));
        }
        let mut w: Vec<f64> = logs.iter().map(|l| l / total).collect();
        // absorb rounding so the sum is 1 to machine precision
        let drift: f64 = 1.0 - w.iter().sum::<f64>();
        let largest = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap_or(0);
        w[largest] += drift;
        Ok(Self(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Uniform sample from the unit simplex of dimension `n_objectives`.
pub fn sample_simplex_weights<R: Rng + ?Sized>(n_objectives: usize, rng: &mut R) -> Result<WeightVector> {
    if n_objectives == 0 {
        return Err(Error::InvalidArgument("need at least one objective".into()));
    }
    loop {
        let u: Vec<f64> = (0..n_objectives).map(|_| rng.random::<f64>()).collect();
        if let Ok(w) = WeightVector::from_uniforms(&u) {
            return Ok(w);
        }
    }
}

/// `sum_i w_i y_i`.
pub fn scalarize_linear(y: &[f64], w: &WeightVector) -> Result<f64> {
    check_len(w.len(), y.len())?;
    Ok(y.iter().zip(w.as_slice()).map(|(a, b)| a * b).sum())
}

/// `max_i w_i |y_i - z_i|`.
pub fn scalarize_chebyshev(y: &[f64], w: &WeightVector, z: &[f64]) -> Result<f64> {
    check_len(w.len(), y.len())?;
    check_len(w.len(), z.len())?;
    Ok(y.iter()
        .zip(z)
        .zip(w.as_slice())
        .map(|((a, b), wi)| wi * (a - b).abs())
        .fold(0.0, f64::max))
}

pub const DEFAULT_PBI_THETA: f64 = 5.0;

/// Penalty-boundary intersection with `v = z - y`:
/// `d1 = |v.w| / |w|`, `d2 = |v - d1 w / |w||`, result `d1 + theta d2`.
///
/// With `signed` the absolute value in `d1` is dropped, giving the
/// conventional direction-sensitive form.
pub fn scalarize_pbi(y: &[f64], w: &WeightVector, z: &[f64], theta: f64, signed: bool) -> Result<f64> {
    check_len(w.len(), y.len())?;
    check_len(w.len(), z.len())?;
    let w = w.as_slice();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("PBI needs a nonzero weight vector".into()));
    }
    let v: Vec<f64> = z.iter().zip(y).map(|(a, b)| a - b).collect();
    let proj = v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / norm;
    let d1 = if signed { proj } else { proj.abs() };
    let d2 = v
        .iter()
        .zip(w)
        .map(|(vi, wi)| (vi - d1 * wi / norm).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(d1 + theta * d2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[derive(Default)]
pub enum Scalarization {
    #[default]
    Linear,
    Chebyshev,
    Pbi {
        #[serde(default = "default_theta")]
        theta: f64,
        #[serde(default)]
        signed: bool,
    },
}

fn default_theta() -> f64 {
    DEFAULT_PBI_THETA
}


impl Scalarization {
    pub fn pbi() -> Self {
        Scalarization::Pbi { theta: DEFAULT_PBI_THETA, signed: false }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            Scalarization::Linear => "L",
            Scalarization::Chebyshev => "CH",
            Scalarization::Pbi { .. } => "PBI",
        }
    }

    /// `utopia` is ignored by the linear form.
    pub fn apply(&self, y: &[f64], w: &WeightVector, utopia: &[f64]) -> Result<f64> {
        match *self {
            Scalarization::Linear => scalarize_linear(y, w),
            Scalarization::Chebyshev => scalarize_chebyshev(y, w, utopia),
            Scalarization::Pbi { theta, signed } => scalarize_pbi(y, w, utopia, theta, signed),
        }
    }
}

//! Columnwise objective normalization: identity, min-max-log and
//! quantile-uniform (empirical CDF).
//!
//! The empirical CDF counts `#{samples <= v} / n`, so ties share a value.
//! Between two adjacent distinct samples it interpolates linearly; below the
//! smallest sample it is 0 and at or above the largest it is 1. On the fit
//! sample itself the map is strictly increasing over distinct values, which
//! is what makes the Pareto subset invariant under it.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::outcome::Outcome;

/// Offset inside the logarithm of the min-max-log transform.
pub const MML_EPSILON: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransformKind {
    #[serde(rename = "id", alias = "identity")]
    Identity,
    #[serde(rename = "mml", alias = "minmax-log")]
    MinMaxLog,
    #[serde(rename = "qu", alias = "quantile-uniform")]
    QuantileUniform,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinMaxLogColumn {
    pub y_min: f64,
    pub y_max: f64,
    pub epsilon: f64,
}

impl MinMaxLogColumn {
    fn apply(&self, y: f64) -> f64 {
        // log((y - y_min) / y_max + eps); the scale falls back to |y_max| or 1
        // when y_max is not positive so the log argument stays >= eps.
        let scale = if self.y_max > 0.0 {
            self.y_max
        } else if self.y_max < 0.0 {
            -self.y_max
        } else {
            1.0
        };
        (((y - self.y_min) / scale).max(0.0) + self.epsilon).ln()
    }
}

/// Empirical CDF of one column.
#[derive(Clone, Debug, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() || samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::CannotFit);
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    fn count_le(&self, v: f64) -> usize {
        self.sorted.partition_point(|&s| s <= v)
    }

    pub fn eval(&self, v: f64) -> f64 {
        let n = self.sorted.len();
        let le = self.count_le(v);
        if le == 0 {
            return 0.0;
        }
        if le == n {
            return 1.0;
        }
        let lo = self.sorted[le - 1];
        let f_lo = le as f64 / n as f64;
        if lo == v {
            return f_lo;
        }
        let hi = self.sorted[le];
        let f_hi = self.count_le(hi) as f64 / n as f64;
        f_lo + (f_hi - f_lo) * (v - lo) / (hi - lo)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FittedTransform {
    Identity { n_objectives: usize },
    MinMaxLog(Vec<MinMaxLogColumn>),
    QuantileUniform(Vec<Ecdf>),
}

impl FittedTransform {
    /// Fits on the finite rows of `rows`; failures are skipped.
    pub fn fit(kind: TransformKind, rows: &[Outcome]) -> Result<Self> {
        let finite: Vec<&[f64]> = rows.iter().filter_map(Outcome::finite).collect();
        Self::fit_rows(kind, &finite)
    }

    pub fn fit_rows<R: AsRef<[f64]>>(kind: TransformKind, rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::CannotFit)?.as_ref();
        let n_obj = first.len();
        for r in rows {
            check_len(n_obj, r.as_ref().len())?;
        }
        let column = |i: usize| rows.iter().map(move |r| r.as_ref()[i]);
        Ok(match kind {
            TransformKind::Identity => FittedTransform::Identity { n_objectives: n_obj },
            TransformKind::MinMaxLog => FittedTransform::MinMaxLog(
                (0..n_obj)
                    .map(|i| {
                        let (lo, hi) = column(i)
                            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                        if !(lo.is_finite() && hi.is_finite()) {
                            return Err(Error::CannotFit);
                        }
                        Ok(MinMaxLogColumn { y_min: lo, y_max: hi, epsilon: MML_EPSILON })
                    })
                    .collect::<Result<_>>()?,
            ),
            TransformKind::QuantileUniform => FittedTransform::QuantileUniform(
                (0..n_obj).map(|i| Ecdf::new(column(i).collect())).collect::<Result<_>>()?,
            ),
        })
    }

    pub fn kind(&self) -> TransformKind {
        match self {
            FittedTransform::Identity { .. } => TransformKind::Identity,
            FittedTransform::MinMaxLog(_) => TransformKind::MinMaxLog,
            FittedTransform::QuantileUniform(_) => TransformKind::QuantileUniform,
        }
    }

    pub fn n_objectives(&self) -> usize {
        match self {
            FittedTransform::Identity { n_objectives } => *n_objectives,
            FittedTransform::MinMaxLog(c) => c.len(),
            FittedTransform::QuantileUniform(c) => c.len(),
        }
    }

    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_objectives(), y.len())?;
        Ok(match self {
            FittedTransform::Identity { .. } => y.to_vec(),
            FittedTransform::MinMaxLog(cols) => cols.iter().zip(y).map(|(c, &v)| c.apply(v)).collect(),
            FittedTransform::QuantileUniform(cols) => cols.iter().zip(y).map(|(c, &v)| c.eval(v)).collect(),
        })
    }

    /// Empirical CDF of the objective upper bounds. Only defined for the
    /// quantile-uniform transform.
    pub fn apply_to_bounds(&self, upper: &[f64]) -> Result<Vec<f64>> {
        match self {
            FittedTransform::QuantileUniform(_) => self.apply(upper),
            other => Err(Error::Unsupported(format!(
                "bound transform requires the quantile-uniform transform, got {:?}",
                other.kind()
            ))),
        }
    }
}

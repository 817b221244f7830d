//! Mixed continuous / integer / categorical search spaces.
//!
//! A [`SearchSpace`] is an ordered list of [`ParameterSpec`]s. Configurations
//! are sampled independently per parameter from its prior and encoded into
//! fixed-length real vectors for the surrogate: continuous and integer values
//! pass through (in `log10` scale for log-uniform priors) and categoricals
//! become their ordinal index.
//!
//! Spaces load from JSON as a list of parameter records:
//!
//! ```json
//! [
//!   {"name": "lr", "kind": "continuous", "bounds": [1e-5, 1e-2], "prior": "log-uniform"},
//!   {"name": "units", "kind": "integer", "bounds": [8, 512], "prior": "log-uniform"},
//!   {"name": "dropout", "kind": "continuous", "bounds": [0.0, 0.5]},
//!   {"name": "activation", "kind": "categorical", "categories": ["relu", "tanh"]}
//! ]
//! ```
//!
//! `prior` defaults to `"uniform"` and is rejected on categoricals.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prior {
    #[default]
    Uniform,
    LogUniform,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Continuous { low: f64, high: f64, prior: Prior },
    Integer { low: i64, high: i64, prior: Prior },
    Categorical { categories: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParameter", into = "RawParameter")]
pub struct ParameterSpec {
    name: String,
    domain: Domain,
}

impl ParameterSpec {
    pub fn continuous(name: impl Into<String>, low: f64, high: f64) -> Result<Self> {
        Self::new(name, Domain::Continuous { low, high, prior: Prior::Uniform })
    }

    pub fn log_uniform(name: impl Into<String>, low: f64, high: f64) -> Result<Self> {
        Self::new(name, Domain::Continuous { low, high, prior: Prior::LogUniform })
    }

    pub fn integer(name: impl Into<String>, low: i64, high: i64, prior: Prior) -> Result<Self> {
        Self::new(name, Domain::Integer { low, high, prior })
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let categories = categories.into_iter().map(Into::into).collect();
        Self::new(name, Domain::Categorical { categories })
    }

    pub fn new(name: impl Into<String>, domain: Domain) -> Result<Self> {
        let name = name.into();
        let bad = |msg: String| Err(Error::InvalidSpace(format!("parameter `{name}`: {msg}")));
        match &domain {
            Domain::Continuous { low, high, prior } => {
                if !(low.is_finite() && high.is_finite()) {
                    return bad("bounds must be finite".into());
                }
                if low >= high {
                    return bad(format!("requires low < high, got [{low}, {high}]"));
                }
                if *prior == Prior::LogUniform && *low <= 0.0 {
                    return bad("log-uniform prior requires low > 0".into());
                }
            }
            Domain::Integer { low, high, prior } => {
                if low > high {
                    return bad(format!("requires low <= high, got [{low}, {high}]"));
                }
                if *prior == Prior::LogUniform && *low <= 0 {
                    return bad("log-uniform prior requires low > 0".into());
                }
            }
            Domain::Categorical { categories } => {
                if categories.is_empty() {
                    return bad("categories must not be empty".into());
                }
                let mut seen = HashSet::new();
                for c in categories {
                    if !seen.insert(c.as_str()) {
                        return bad(format!("duplicate category `{c}`"));
                    }
                }
            }
        }
        Ok(Self { name, domain })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        match &self.domain {
            Domain::Continuous { low, high, prior } => {
                let u: f64 = rng.random();
                let v = match prior {
                    Prior::Uniform => low + u * (high - low),
                    Prior::LogUniform => (low.ln() + u * (high.ln() - low.ln())).exp(),
                };
                ParamValue::Real(v.clamp(*low, *high))
            }
            Domain::Integer { low, high, prior } => {
                let u: f64 = rng.random();
                let (lo, hi) = (*low as f64, *high as f64);
                let v = match prior {
                    Prior::Uniform => (lo - 0.5) + u * (hi - lo + 1.0),
                    Prior::LogUniform => (lo.ln() + u * (hi.ln() - lo.ln())).exp(),
                };
                ParamValue::Int(round_half_up(v).clamp(*low, *high))
            }
            Domain::Categorical { categories } => {
                let i = rng.random_range(0..categories.len());
                ParamValue::Category(categories[i].clone())
            }
        }
    }

    pub fn contains(&self, value: &ParamValue) -> bool {
        match (&self.domain, value) {
            (Domain::Continuous { low, high, .. }, ParamValue::Real(v)) => *v >= *low && *v <= *high,
            (Domain::Integer { low, high, .. }, ParamValue::Int(v)) => v >= low && v <= high,
            (Domain::Categorical { categories }, ParamValue::Category(c)) => categories.contains(c),
            _ => false,
        }
    }

    fn encode(&self, value: &ParamValue) -> Result<f64> {
        let mismatch = || Error::Structure(format!("value {value} outside parameter `{}`", self.name));
        if !self.contains(value) {
            return Err(mismatch());
        }
        Ok(match (&self.domain, value) {
            (Domain::Continuous { prior, .. }, ParamValue::Real(v)) => scale(*v, *prior),
            (Domain::Integer { prior, .. }, ParamValue::Int(v)) => scale(*v as f64, *prior),
            (Domain::Categorical { categories }, ParamValue::Category(c)) => {
                categories.iter().position(|k| k == c).ok_or_else(mismatch)? as f64
            }
            _ => return Err(mismatch()),
        })
    }

    /// Inclusive range of the encoded coordinate.
    pub fn encoded_bounds(&self) -> (f64, f64) {
        match &self.domain {
            Domain::Continuous { low, high, prior } => (scale(*low, *prior), scale(*high, *prior)),
            Domain::Integer { low, high, prior } => {
                (scale(*low as f64, *prior), scale(*high as f64, *prior))
            }
            Domain::Categorical { categories } => (0.0, (categories.len() - 1) as f64),
        }
    }

    /// Inverse of the encoding; out-of-range coordinates are clamped.
    pub fn decode(&self, x: f64) -> ParamValue {
        match &self.domain {
            Domain::Continuous { low, high, prior } => {
                ParamValue::Real(unscale(x, *prior).clamp(*low, *high))
            }
            Domain::Integer { low, high, prior } => {
                ParamValue::Int(round_half_up(unscale(x, *prior)).clamp(*low, *high))
            }
            Domain::Categorical { categories } => {
                let i = round_half_up(x).clamp(0, categories.len() as i64 - 1) as usize;
                ParamValue::Category(categories[i].clone())
            }
        }
    }
}

fn scale(v: f64, prior: Prior) -> f64 {
    match prior {
        Prior::Uniform => v,
        Prior::LogUniform => v.log10(),
    }
}

fn unscale(x: f64, prior: Prior) -> f64 {
    match prior {
        Prior::Uniform => x,
        Prior::LogUniform => 10f64.powf(x),
    }
}

fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

#[derive(Serialize, Deserialize)]
struct RawParameter {
    name: String,
    kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prior: Option<Prior>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Continuous,
    Integer,
    Categorical,
}

impl TryFrom<RawParameter> for ParameterSpec {
    type Error = Error;

    fn try_from(raw: RawParameter) -> Result<Self> {
        let name = raw.name;
        let missing = |what: &str| Error::InvalidSpace(format!("parameter `{name}`: missing {what}"));
        let domain = match raw.kind {
            Kind::Continuous => {
                let [low, high] = raw.bounds.ok_or_else(|| missing("bounds"))?;
                Domain::Continuous { low, high, prior: raw.prior.unwrap_or_default() }
            }
            Kind::Integer => {
                let [low, high] = raw.bounds.ok_or_else(|| missing("bounds"))?;
                if low.fract() != 0.0 || high.fract() != 0.0 {
                    return Err(Error::InvalidSpace(format!(
                        "parameter `{name}`: integer bounds must be whole numbers"
                    )));
                }
                Domain::Integer { low: low as i64, high: high as i64, prior: raw.prior.unwrap_or_default() }
            }
            Kind::Categorical => {
                if raw.prior.is_some() {
                    return Err(Error::InvalidSpace(format!(
                        "parameter `{name}`: categorical parameters take no prior"
                    )));
                }
                Domain::Categorical { categories: raw.categories.ok_or_else(|| missing("categories"))? }
            }
        };
        ParameterSpec::new(name, domain)
    }
}

impl From<ParameterSpec> for RawParameter {
    fn from(p: ParameterSpec) -> Self {
        match p.domain {
            Domain::Continuous { low, high, prior } => RawParameter {
                name: p.name,
                kind: Kind::Continuous,
                bounds: Some([low, high]),
                categories: None,
                prior: Some(prior),
            },
            Domain::Integer { low, high, prior } => RawParameter {
                name: p.name,
                kind: Kind::Integer,
                bounds: Some([low as f64, high as f64]),
                categories: None,
                prior: Some(prior),
            },
            Domain::Categorical { categories } => RawParameter {
                name: p.name,
                kind: Kind::Categorical,
                bounds: None,
                categories: Some(categories),
                prior: None,
            },
        }
    }
}

/// Ordered list of parameters. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParameterSpec>", into = "Vec<ParameterSpec>")]
pub struct SearchSpace {
    params: Vec<ParameterSpec>,
}

impl TryFrom<Vec<ParameterSpec>> for SearchSpace {
    type Error = Error;

    fn try_from(params: Vec<ParameterSpec>) -> Result<Self> {
        SearchSpace::new(params)
    }
}

impl From<SearchSpace> for Vec<ParameterSpec> {
    fn from(s: SearchSpace) -> Self {
        s.params
    }
}

impl SearchSpace {
    pub fn new(params: Vec<ParameterSpec>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidSpace("search space has no parameters".into()));
        }
        let mut seen = HashSet::new();
        for p in &params {
            if !seen.insert(p.name.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate parameter name `{}`", p.name)));
            }
        }
        Ok(Self { params })
    }

    /// `[0, 1]^dim` with parameters named `x0`, `x1`, ...
    pub fn unit_cube(dim: usize) -> Result<Self> {
        let params = (0..dim)
            .map(|i| ParameterSpec::continuous(format!("x{i}"), 0.0, 1.0))
            .collect::<Result<Vec<_>>>()?;
        Self::new(params)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn params(&self) -> &[ParameterSpec] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        Configuration {
            values: self.params.iter().map(|p| (p.name.clone(), p.sample(rng))).collect(),
        }
    }

    pub fn encode(&self, config: &Configuration) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.dim());
        self.encode_into(config, &mut out)?;
        Ok(out)
    }

    /// Appends the encoding of `config` to `out`.
    pub fn encode_into(&self, config: &Configuration, out: &mut Vec<f64>) -> Result<()> {
        if config.values.len() != self.params.len() {
            return Err(Error::Structure(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                config.values.len()
            )));
        }
        for (p, (name, value)) in self.params.iter().zip(&config.values) {
            if *name != p.name {
                return Err(Error::Structure(format!("expected parameter `{}`, found `{name}`", p.name)));
            }
            out.push(p.encode(value)?);
        }
        Ok(())
    }

    pub fn decode(&self, x: &[f64]) -> Result<Configuration> {
        if x.len() != self.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), actual: x.len() });
        }
        Ok(Configuration {
            values: self.params.iter().zip(x).map(|(p, &v)| (p.name.clone(), p.decode(v))).collect(),
        })
    }

    pub fn contains(&self, config: &Configuration) -> bool {
        config.values.len() == self.params.len()
            && self
                .params
                .iter()
                .zip(&config.values)
                .all(|(p, (name, v))| *name == p.name && p.contains(v))
    }
}

/// `n` independent samples from `space`.
pub fn grid_or_random_candidates<R: Rng + ?Sized>(
    space: &SearchSpace,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Configuration>> {
    if n == 0 {
        return Err(Error::InvalidArgument("candidate count must be at least 1".into()));
    }
    Ok((0..n).map(|_| space.sample(rng)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Category(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Real(v) => Some(*v),
            ParamValue::Category(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Category(c) => Some(c),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Category(c) => write!(f, "{c:?}"),
        }
    }
}

/// One point of a search space: values in parameter order.
///
/// Serializes as a JSON object whose key order follows the parameter order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Configuration {
    pub values: Vec<(String, ParamValue)>,
}

impl Configuration {
    pub fn new(values: Vec<(String, ParamValue)>) -> Self {
        Self { values }
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn real(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(ParamValue::as_f64)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Serialize for Configuration {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.values.len()))?;
        for (k, v) in &self.values {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct OrderedVisitor;

        impl<'de> Visitor<'de> for OrderedVisitor {
            type Value = Configuration;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of parameter names to values")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut values = Vec::with_capacity(access.size_hint().unwrap_or(0));
                while let Some((k, v)) = access.next_entry::<String, ParamValue>()? {
                    values.push((k, v));
                }
                Ok(Configuration { values })
            }
        }

        deserializer.deserialize_map(OrderedVisitor)
    }
}

//! Decentralized multi-objective Bayesian optimization.
//!
//! The building blocks are usable on their own:
//!
//! - [`space`]: mixed search spaces, sampling and numeric encoding
//! - [`indicators`]: dominance, Pareto fronts, hypervolume, GD+ and IGD+
//! - [`transforms`]: identity, min-max-log and quantile-uniform normalization
//! - [`scalarize`]: linear, Chebyshev and PBI scalarizations with simplex weights
//! - [`surrogate`]: random-split regression forest
//! - [`mobo`]: the sequential optimizer
//! - [`dbo`]: decentralized agents, the shared archive and schedulers
//! - [`baselines`]: random search and steady-state NSGA-II
//! - [`problems`]: DTLZ benchmarks and a synthetic tuning task
//! - [`harness`]: experiments, metrics, rankings and summaries

pub mod baselines;
pub mod dbo;
pub mod error;
pub mod harness;
pub mod indicators;
pub mod mobo;
pub mod outcome;
pub mod problems;
pub mod scalarize;
pub mod space;
pub mod surrogate;
pub mod transforms;

pub use error::{Error, Result};
pub use outcome::{FailureMarker, Outcome};
pub use space::{Configuration, ParamValue, ParameterSpec, Prior, SearchSpace};

use serde::{Deserialize, Serialize};

/// Why an evaluation produced no objective values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureMarker {
    pub reason: String,
}

impl FailureMarker {
    pub fn new(reason: impl Into<String>) -> Self {
        Self { reason: reason.into() }
    }
}

/// Result of one black-box evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Objectives(Vec<f64>),
    Failure(FailureMarker),
}

impl Outcome {
    pub fn failure(reason: impl Into<String>) -> Self {
        Outcome::Failure(FailureMarker::new(reason))
    }

    /// Non-finite objective vectors are turned into failures.
    pub fn checked(values: Vec<f64>) -> Self {
        if values.iter().all(|v| v.is_finite()) {
            Outcome::Objectives(values)
        } else {
            Outcome::failure("non-finite objective")
        }
    }

    /// The objective vector when the evaluation succeeded with finite values.
    pub fn finite(&self) -> Option<&[f64]> {
        match self {
            Outcome::Objectives(v) if v.iter().all(|x| x.is_finite()) => Some(v),
            _ => None,
        }
    }

    pub fn is_failure(&self) -> bool {
        self.finite().is_none()
    }
}

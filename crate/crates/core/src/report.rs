//! JSON-lines report records shared by the estimators and the CLI.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::estimate::StabilityEstimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub op: String,
    pub params: Value,
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<Value>,
}

impl Report {
    pub fn new(op: impl Into<String>, params: Value, est: &StabilityEstimate) -> Self {
        Report {
            op: op.into(),
            params,
            value: est.value,
            std_error: est.std_error,
            n_samples: est.n_samples,
            seed: est.seed,
            margin: None,
            violation: None,
            extra: None,
        }
    }

    pub fn with_margin(mut self, margin: f64, violation: bool) -> Self {
        self.margin = Some(margin);
        self.violation = Some(violation);
        self
    }

    pub fn with_extra(mut self, extra: Value) -> Self {
        self.extra = Some(extra);
        self
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
    Exact,
}

/// A probability with its uncertainty and provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub method: Method,
    pub seed: u64,
}

impl StabilityEstimate {
    pub fn closed_form(value: f64) -> Self {
        StabilityEstimate {
            value,
            std_error: 0.0,
            n_samples: 0,
            method: Method::ClosedForm,
            seed: 0,
        }
    }

    pub fn quadrature(value: f64) -> Self {
        StabilityEstimate {
            method: Method::Quadrature,
            ..Self::closed_form(value)
        }
    }

    pub fn exact(value: f64) -> Self {
        StabilityEstimate {
            method: Method::Exact,
            ..Self::closed_form(value)
        }
    }

    /// Binomial proportion estimate: `std_error = sqrt(p(1-p)/N)`.
    pub fn from_count(hits: u64, n: u64, seed: u64) -> Self {
        let p = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        StabilityEstimate {
            value: p,
            std_error: if n == 0 { 0.0 } else { (p * (1.0 - p) / n as f64).sqrt() },
            n_samples: n,
            method: Method::MonteCarlo,
            seed,
        }
    }

    /// Mean of a bounded, non-Bernoulli statistic.
    pub fn from_mean(mean: f64, std_error: f64, n: u64, seed: u64) -> Self {
        StabilityEstimate {
            value: mean,
            std_error,
            n_samples: n,
            method: Method::MonteCarlo,
            seed,
        }
    }

    /// True when `other` lies within `z` combined standard errors.
    pub fn agrees_with(&self, other: f64, z: f64) -> bool {
        (self.value - other).abs() <= z * self.std_error
    }
}

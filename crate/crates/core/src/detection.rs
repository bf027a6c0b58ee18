use serde::{Deserialize, Serialize};

/// Detection level used throughout: evidence below it counts as a warning.
pub const DEFAULT_THRESHOLD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    /// Fraction of surrogate taus at or above the observed tau.
    Surrogate,
    /// Posterior mass of tau at or below zero.
    Bayesian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub indicator: String,
    pub evidence: f64,
    pub kind: EvidenceKind,
    pub threshold: f64,
    pub detected: bool,
    /// Observed tau for surrogate tests, posterior median tau otherwise.
    pub tau: Option<f64>,
}

impl DetectionResult {
    pub fn new(indicator: impl Into<String>, evidence: f64, kind: EvidenceKind, threshold: f64) -> Self {
        Self {
            indicator: indicator.into(),
            evidence,
            kind,
            threshold,
            detected: evidence < threshold,
            tau: None,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = Some(tau);
        self
    }

    /// A non-detection recorded when the indicator could not be computed.
    pub fn not_detected(indicator: impl Into<String>, kind: EvidenceKind, threshold: f64) -> Self {
        Self::new(indicator, 1.0, kind, threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_strict() {
        assert!(DetectionResult::new("x", 0.099, EvidenceKind::Surrogate, 0.1).detected);
        assert!(!DetectionResult::new("x", 0.1, EvidenceKind::Surrogate, 0.1).detected);
        assert!(!DetectionResult::not_detected("x", EvidenceKind::Bayesian, 0.1).detected);
    }
}

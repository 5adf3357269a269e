//! Closed-form generalization bounds for the perturbed experience loss.

use serde::{Deserialize, Serialize};

use super::LearningError;

/// `C = 48 ∫₀¹ √(−ln x) dx = 48 Γ(3/2) = 24 √π`.
pub fn constant_c() -> f64 {
    24.0 * std::f64::consts::PI.sqrt()
}

/// Parameters of the excess-risk bound and of the perturbation-scale rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Box radius of the weight set.
    #[serde(rename = "M")]
    pub m: f64,
    /// Feature dimension.
    pub d: f64,
    pub sigma: f64,
    /// Training set size.
    pub n: f64,
    pub delta: f64,
    pub a: f64,
    pub b: f64,
    pub beta: u8,
    pub kappa: f64,
    /// `E[d(x)^{1/β} / u(x)]`.
    pub e_term: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self {
            m: 10.0,
            d: 4.0,
            sigma: 1.0,
            n: 10_000.0,
            delta: 0.05,
            a: 0.0,
            b: 1.0,
            beta: 1,
            kappa: 1.0,
            e_term: 1.0,
        }
    }
}

impl BoundParams {
    pub fn validate(&self) -> Result<(), LearningError> {
        let positive = [
            ("M", self.m),
            ("d", self.d),
            ("sigma", self.sigma),
            ("n", self.n),
            ("b", self.b),
            ("kappa", self.kappa),
            ("e_term", self.e_term),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(LearningError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(LearningError::Config(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.a.is_finite() && self.a >= 0.0) {
            return Err(LearningError::Config(format!(
                "a must be non-negative, got {}",
                self.a
            )));
        }
        if self.beta != 1 && self.beta != 2 {
            return Err(LearningError::Config(format!(
                "beta must be 1 or 2, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// `C·M·d / (σ√n) + √(2 ln(2/δ) / n)`.
pub fn excess_risk_bound(p: &BoundParams) -> Result<f64, LearningError> {
    p.validate()?;
    Ok(constant_c() * p.m * p.d / (p.sigma * p.n.sqrt())
        + (2.0 * (2.0 / p.delta).ln() / p.n).sqrt())
}

/// Perturbation scale minimizing the combined bound:
/// `σ_n = √(C·M·√d / (√n · b · κ · E_term))`.
pub fn sigma_n(p: &BoundParams) -> Result<f64, LearningError> {
    p.validate()?;
    Ok((constant_c() * p.m * p.d.sqrt() / (p.n.sqrt() * p.b * p.kappa * p.e_term)).sqrt())
}

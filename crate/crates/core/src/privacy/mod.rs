//! Privacy accounting: Rényi-DP curves for the Gaussian, subsampled
//! Gaussian and exponential mechanisms, composition, conversion to
//! (ε, δ)-DP, noise calibration, and the privacy overhead of randomized
//! hyperparameter tuning with a truncated-negative-binomial run count.

mod rdp;
mod tnb;

pub use rdp::{
    calibrate_for_curve, calibrate_noise_multiplier, calibrate_noise_multiplier_with, em_selection_curve,
    gaussian_curve, rdp_compose, rdp_gaussian, rdp_subsampled_gaussian, rdp_to_approx_dp,
    subsampled_gaussian_curve, tuning_rdp_cost, Conversion, RdpCurve, SubsampledGaussianEvent,
    SIGMA_SEARCH_MAX, SIGMA_SEARCH_MIN,
};
pub use tnb::{tnb_pmf_and_mean, TnbParams};

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// An (ε, δ) differential-privacy target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return param(format!("epsilon must be finite and positive, got {epsilon}"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return param(format!("delta must lie in (0, 1), got {delta}"));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Noise standard deviation of the classical one-shot Gaussian mechanism,
/// `c * sqrt(2 ln(1.25/δ)) / ε`, for a release with ℓ2 sensitivity `clip`.
pub fn gaussian_sigma_for_budget(clip: f64, budget: PrivacyBudget) -> Result<f64> {
    if !(clip.is_finite() && clip > 0.0) {
        return param(format!("clip bound must be positive, got {clip}"));
    }
    Ok(clip * (2.0 * (1.25 / budget.delta()).ln()).sqrt() / budget.epsilon())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_validation() {
        assert!(PrivacyBudget::new(1.0, 1e-5).is_ok());
        assert!(PrivacyBudget::new(0.0, 1e-5).is_err());
        assert!(PrivacyBudget::new(-1.0, 1e-5).is_err());
        assert!(PrivacyBudget::new(f64::INFINITY, 1e-5).is_err());
        assert!(PrivacyBudget::new(1.0, 0.0).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0).is_err());
    }

    #[test]
    fn classical_gaussian_calibration() {
        let b = PrivacyBudget::new(1.0, 1e-5).unwrap();
        // sqrt(2 ln 125000) evaluated independently at high precision.
        let s1 = gaussian_sigma_for_budget(1.0, b).unwrap();
        assert!((s1 - 4.844_805_262_605_389).abs() < 1e-9, "{s1}");
        let s2 = gaussian_sigma_for_budget(2.0, b).unwrap();
        assert_eq!(s2, 2.0 * s1);
        let mut prev = f64::INFINITY;
        for eps in [0.5, 1.0, 2.0, 8.0, 100.0, 1e6] {
            let s = gaussian_sigma_for_budget(1.0, PrivacyBudget::new(eps, 1e-5).unwrap()).unwrap();
            assert!(s < prev);
            prev = s;
        }
        assert!(prev < 1e-5);
        assert!(gaussian_sigma_for_budget(0.0, b).is_err());
        assert!(gaussian_sigma_for_budget(-1.0, b).is_err());
    }
}

//! Private federated mean estimation: the scalar hierarchical Gaussian
//! model in which MR-MTL's estimator, its optimal regularization strength
//! and all of its error gaps have closed forms, plus a Monte Carlo
//! simulator of the same generative process.
//!
//! Silo centers are drawn as `w_k ~ N(θ, τ²)`, each silo holds `n_k`
//! samples `x ~ N(w_k, σ_k²)`, and releases the clipped sample sum plus
//! Gaussian noise of standard deviation `σ_{k,DP}`.

mod closed_form;
mod simulate;
mod tuning;

pub use closed_form::{
    dp_utility_gap, error_at_lambda, fedavg_error, gap_to_fedavg, gap_to_local, local_variance,
    mrmtl_weight, optimal_error, optimal_lambda, silo_specific_lambda, Lambda, Spectrum,
};
pub use simulate::{simulate, simulate_grid, McEstimate};
pub use tuning::{
    tuning_cost_study, write_study_csv, StudyEvaluator, StudyRow, TuningStudy,
};

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::privacy::{gaussian_sigma_for_budget, PrivacyBudget};

/// A value shared by every silo or given per silo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerSilo<T> {
    Uniform(T),
    Each(Vec<T>),
}

impl<T: Copy> PerSilo<T> {
    pub fn get(&self, k: usize) -> T {
        match self {
            PerSilo::Uniform(v) => *v,
            PerSilo::Each(v) => v[k],
        }
    }

    pub fn uniform(&self) -> Option<T> {
        match self {
            PerSilo::Uniform(v) => Some(*v),
            PerSilo::Each(_) => None,
        }
    }

    fn check_len(&self, silos: usize, field: &str) -> Result<()> {
        match self {
            PerSilo::Each(v) if v.len() != silos => {
                param(format!("{field} lists {} values for {silos} silos", v.len()))
            }
            _ => Ok(()),
        }
    }

    fn values(&self, silos: usize) -> Vec<T> {
        (0..silos).map(|k| self.get(k)).collect()
    }
}

/// Parameters of the mean-estimation world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEstProblem {
    silos: usize,
    sample_counts: PerSilo<usize>,
    data_var: PerSilo<f64>,
    heterogeneity: f64,
    meta_center: f64,
    clip: f64,
    dp_noise: PerSilo<f64>,
}

impl MeanEstProblem {
    /// Equal `n`, `σ²` and `σ_DP` for every silo. The clip bound defaults
    /// to `|θ| + 6σ + 6τ` so that clipping is inactive with high probability.
    pub fn homogeneous(
        silos: usize,
        n: usize,
        data_var: f64,
        heterogeneity: f64,
        meta_center: f64,
        dp_noise: f64,
    ) -> Result<Self> {
        Self::heterogeneous(
            silos,
            PerSilo::Uniform(n),
            PerSilo::Uniform(data_var),
            heterogeneity,
            meta_center,
            PerSilo::Uniform(dp_noise),
        )
    }

    pub fn heterogeneous(
        silos: usize,
        sample_counts: PerSilo<usize>,
        data_var: PerSilo<f64>,
        heterogeneity: f64,
        meta_center: f64,
        dp_noise: PerSilo<f64>,
    ) -> Result<Self> {
        if silos < 2 {
            return param(format!("mean estimation needs at least 2 silos, got {silos}"));
        }
        sample_counts.check_len(silos, "sample_counts")?;
        data_var.check_len(silos, "data_var")?;
        dp_noise.check_len(silos, "dp_noise")?;
        if sample_counts.values(silos).contains(&0) {
            return param("every silo needs at least one sample");
        }
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !data_var.values(silos).into_iter().all(nonneg) {
            return param("data variances must be finite and non-negative");
        }
        if !dp_noise.values(silos).into_iter().all(nonneg) {
            return param("privacy noise scales must be finite and non-negative");
        }
        if !nonneg(heterogeneity) {
            return param("heterogeneity must be finite and non-negative");
        }
        if !meta_center.is_finite() {
            return param("meta center must be finite");
        }
        let max_sd = data_var
            .values(silos)
            .into_iter()
            .fold(0.0_f64, f64::max)
            .sqrt();
        let clip = (meta_center.abs() + 6.0 * max_sd + 6.0 * heterogeneity.sqrt()).max(1.0);
        Ok(Self {
            silos,
            sample_counts,
            data_var,
            heterogeneity,
            meta_center,
            clip,
            dp_noise,
        })
    }

    /// Overrides the per-sample clip bound.
    pub fn with_clip(mut self, clip: f64) -> Result<Self> {
        if !(clip.is_finite() && clip > 0.0) {
            return param(format!("clip bound must be positive, got {clip}"));
        }
        self.clip = clip;
        Ok(self)
    }

    /// Sets every silo's noise to the classical Gaussian calibration of
    /// `budget` at this problem's clip bound.
    pub fn with_budget(mut self, budget: PrivacyBudget) -> Result<Self> {
        self.dp_noise = PerSilo::Uniform(gaussian_sigma_for_budget(self.clip, budget)?);
        Ok(self)
    }

    pub fn with_dp_noise(mut self, dp_noise: PerSilo<f64>) -> Result<Self> {
        dp_noise.check_len(self.silos, "dp_noise")?;
        if !dp_noise.values(self.silos).into_iter().all(|v| v.is_finite() && v >= 0.0) {
            return param("privacy noise scales must be finite and non-negative");
        }
        self.dp_noise = dp_noise;
        Ok(self)
    }

    pub fn silos(&self) -> usize {
        self.silos
    }

    pub fn sample_count(&self, k: usize) -> usize {
        self.sample_counts.get(k)
    }

    pub fn sample_counts(&self) -> &PerSilo<usize> {
        &self.sample_counts
    }

    pub fn data_var(&self, k: usize) -> f64 {
        self.data_var.get(k)
    }

    pub fn dp_noise(&self, k: usize) -> f64 {
        self.dp_noise.get(k)
    }

    pub fn dp_noise_scales(&self) -> &PerSilo<f64> {
        &self.dp_noise
    }

    pub fn heterogeneity(&self) -> f64 {
        self.heterogeneity
    }

    pub fn meta_center(&self) -> f64 {
        self.meta_center
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    /// True when every per-silo field is uniform.
    pub fn is_homogeneous(&self) -> bool {
        self.sample_counts.uniform().is_some()
            && self.data_var.uniform().is_some()
            && self.dp_noise.uniform().is_some()
    }
}

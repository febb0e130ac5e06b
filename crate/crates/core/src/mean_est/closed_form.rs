use super::MeanEstProblem;
use crate::error::{param, Error, Result};

/// An MR-MTL regularization strength, where `Infinite` stands for the
/// fully-federated (FedAvg) endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Finite(f64),
    Infinite,
}

impl From<f64> for Lambda {
    fn from(v: f64) -> Self {
        if v.is_infinite() && v > 0.0 {
            Lambda::Infinite
        } else {
            Lambda::Finite(v)
        }
    }
}

impl Lambda {
    pub fn finite(self) -> Option<f64> {
        match self {
            Lambda::Finite(v) => Some(v),
            Lambda::Infinite => None,
        }
    }

    fn validate(self) -> Result<Self> {
        match self {
            Lambda::Finite(v) if !(v >= 0.0 && v.is_finite()) => {
                param(format!("lambda must be non-negative, got {v}"))
            }
            other => Ok(other),
        }
    }
}

/// The three numbers every homogeneous closed form depends on: silo count
/// `K`, local variance `σ_loc²` and heterogeneity `τ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub silos: usize,
    pub local_var: f64,
    pub tau2: f64,
}

impl Spectrum {
    pub fn of(problem: &MeanEstProblem) -> Result<Self> {
        if !problem.is_homogeneous() {
            return param(
                "closed forms need equal n, σ² and σ_DP across silos; use silo_specific_lambda",
            );
        }
        Ok(Self {
            silos: problem.silos(),
            local_var: local_variance(problem)[0],
            tau2: problem.heterogeneity(),
        })
    }

    fn k(&self) -> f64 {
        self.silos as f64
    }

    /// `(1 - 1/K)(σ_loc² + λ²τ²)/(λ+1)² + σ_loc²/K`; the infinite endpoint is
    /// the FedAvg error.
    pub fn error_at(&self, lambda: Lambda) -> f64 {
        let k = self.k();
        match lambda {
            Lambda::Finite(l) => {
                (1.0 - 1.0 / k) * (self.local_var + l * l * self.tau2) / ((l + 1.0) * (l + 1.0))
                    + self.local_var / k
            }
            Lambda::Infinite => self.fedavg_error(),
        }
    }

    pub fn fedavg_error(&self) -> f64 {
        (self.local_var + (self.k() - 1.0) * self.tau2) / self.k()
    }

    pub fn optimal_lambda(&self) -> Result<Lambda> {
        if self.tau2 > 0.0 {
            Ok(Lambda::Finite(self.local_var / self.tau2))
        } else if self.local_var > 0.0 {
            Ok(Lambda::Infinite)
        } else {
            Err(Error::DegenerateHeterogeneity)
        }
    }

    pub fn optimal_error(&self) -> f64 {
        let (s, t, k) = (self.local_var, self.tau2, self.k());
        if s + t == 0.0 {
            return 0.0;
        }
        s * (s + k * t) / (k * (s + t))
    }

    pub fn gap_to_local(&self) -> f64 {
        let (s, t) = (self.local_var, self.tau2);
        if s + t == 0.0 {
            return 0.0;
        }
        (1.0 - 1.0 / self.k()) * s * s / (s + t)
    }

    pub fn gap_to_fedavg(&self) -> f64 {
        let (s, t) = (self.local_var, self.tau2);
        if s + t == 0.0 {
            return 0.0;
        }
        (1.0 - 1.0 / self.k()) * t * t / (s + t)
    }
}

/// Per-silo variance of the private local estimate around the true center:
/// `σ_k²/n_k + σ_{k,DP}²/n_k²`.
pub fn local_variance(problem: &MeanEstProblem) -> Vec<f64> {
    (0..problem.silos())
        .map(|k| {
            let n = problem.sample_count(k) as f64;
            let dp = problem.dp_noise(k);
            problem.data_var(k) / n + dp * dp / (n * n)
        })
        .collect()
}

/// Weight `α = (K+λ)/((1+λ)K)` on the silo's own estimate in MR-MTL's
/// minimizer `α ŵ_k + (1-α) ŵ_{\k}`.
pub fn mrmtl_weight(lambda: impl Into<Lambda>, silos: usize) -> Result<f64> {
    if silos < 2 {
        return param(format!("need at least 2 silos, got {silos}"));
    }
    let k = silos as f64;
    Ok(match lambda.into().validate()? {
        Lambda::Finite(l) => (k + l) / ((1.0 + l) * k),
        Lambda::Infinite => 1.0 / k,
    })
}

/// Generalization-optimal strength `λ* = σ_loc²/τ²`. Zero heterogeneity
/// yields [`Lambda::Infinite`].
pub fn optimal_lambda(problem: &MeanEstProblem) -> Result<Lambda> {
    Spectrum::of(problem)?.optimal_lambda()
}

pub fn error_at_lambda(problem: &MeanEstProblem, lambda: impl Into<Lambda>) -> Result<f64> {
    let lambda = lambda.into().validate()?;
    Ok(Spectrum::of(problem)?.error_at(lambda))
}

/// Error of the FedAvg estimator, `(σ_loc² + (K-1)τ²)/K`.
pub fn fedavg_error(problem: &MeanEstProblem) -> Result<f64> {
    Ok(Spectrum::of(problem)?.fedavg_error())
}

/// `σ_loc²(σ_loc² + Kτ²) / (K(σ_loc² + τ²))`.
pub fn optimal_error(problem: &MeanEstProblem) -> Result<f64> {
    Ok(Spectrum::of(problem)?.optimal_error())
}

/// Extra error of local training over the optimum.
pub fn gap_to_local(problem: &MeanEstProblem) -> Result<f64> {
    Ok(Spectrum::of(problem)?.gap_to_local())
}

/// Extra error of FedAvg over the optimum.
pub fn gap_to_fedavg(problem: &MeanEstProblem) -> Result<f64> {
    Ok(Spectrum::of(problem)?.gap_to_fedavg())
}

/// Error increase caused by privacy noise at strength `λ`:
/// `(1 - 1/K) σ_DP²/(n²(λ+1)²) + σ_DP²/(K n²)`.
pub fn dp_utility_gap(problem: &MeanEstProblem, lambda: impl Into<Lambda>) -> Result<f64> {
    let lambda = lambda.into().validate()?;
    if !problem.is_homogeneous() {
        return param("privacy utility gap needs a homogeneous problem");
    }
    let n = problem.sample_count(0) as f64;
    let k = problem.silos() as f64;
    let v = problem.dp_noise(0).powi(2) / (n * n);
    Ok(match lambda {
        Lambda::Finite(l) => (1.0 - 1.0 / k) * v / ((l + 1.0) * (l + 1.0)) + v / k,
        Lambda::Infinite => v / k,
    })
}

/// Optimal strength for silo `k` when local variances differ across silos:
/// `σ̃_k² / (τ² + (Σ_{j≠k} σ̃_j²/(K-1) - σ̃_k²)/K)`.
///
/// A non-positive denominator means silo `k` is noisier than federating can
/// hurt, and the fully-federated endpoint is returned.
pub fn silo_specific_lambda(problem: &MeanEstProblem, silo: usize) -> Result<Lambda> {
    let k_total = problem.silos();
    if silo >= k_total {
        return param(format!("silo index {silo} out of range for {k_total} silos"));
    }
    let vars = local_variance(problem);
    let k = k_total as f64;
    let others: f64 = vars
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != silo)
        .map(|(_, v)| v)
        .sum::<f64>()
        / (k - 1.0);
    let denom = problem.heterogeneity() + (others - vars[silo]) / k;
    if denom > 0.0 {
        Ok(Lambda::Finite(vars[silo] / denom))
    } else {
        Ok(Lambda::Infinite)
    }
}

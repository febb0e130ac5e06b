use serde::{Deserialize, Serialize};

use crate::dp_sgd::DpSgdConfig;
use crate::error::{param, Result};
use crate::mean_est::PerSilo;
use crate::model::LossKind;

/// A training method by registry name plus its hyperparameters. Each
/// method accepts only the parameters it uses.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_select_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_rounds_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precondition_fraction: Option<f64>,
}

impl MethodSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn local() -> Self {
        Self::new("local")
    }

    pub fn fedavg() -> Self {
        Self::new("fedavg")
    }

    pub fn mrmtl(lambda: f64) -> Self {
        Self {
            lambda: Some(lambda),
            ..Self::new("mrmtl")
        }
    }

    pub fn ditto(lambda: f64) -> Self {
        Self {
            lambda: Some(lambda),
            ..Self::new("ditto")
        }
    }

    pub fn finetune(switch_fraction: f64) -> Self {
        Self {
            switch_fraction: Some(switch_fraction),
            ..Self::new("finetune")
        }
    }

    pub fn ifca(clusters: usize, cluster_rounds_fraction: f64) -> Self {
        Self {
            clusters: Some(clusters),
            cluster_rounds_fraction: Some(cluster_rounds_fraction),
            ..Self::new("ifca")
        }
    }

    pub fn ifca_mrmtl(clusters: usize, lambda: f64, precondition_fraction: f64) -> Self {
        Self {
            clusters: Some(clusters),
            lambda: Some(lambda),
            precondition_fraction: Some(precondition_fraction),
            ..Self::new("ifca_mrmtl")
        }
    }

    /// Errors if any parameter outside `allowed` is set.
    pub fn expect_only(&self, allowed: &[&str]) -> Result<()> {
        let set = [
            ("lambda", self.lambda.is_some()),
            ("clusters", self.clusters.is_some()),
            ("switch_fraction", self.switch_fraction.is_some()),
            ("eps_select_fraction", self.eps_select_fraction.is_some()),
            ("cluster_rounds_fraction", self.cluster_rounds_fraction.is_some()),
            ("precondition_fraction", self.precondition_fraction.is_some()),
        ];
        match set.iter().find(|(k, on)| *on && !allowed.contains(k)) {
            Some((k, _)) => param(format!("method '{}' does not take parameter '{k}'", self.name)),
            None => Ok(()),
        }
    }

    pub(crate) fn require_lambda(&self) -> Result<f64> {
        match self.lambda {
            Some(l) if l.is_finite() && l >= 0.0 => Ok(l),
            Some(l) => param(format!("lambda must be finite and non-negative, got {l}")),
            None => param(format!("method '{}' requires 'lambda'", self.name)),
        }
    }

    pub(crate) fn require_clusters(&self) -> Result<usize> {
        match self.clusters {
            Some(g) if g >= 1 => Ok(g),
            Some(_) => param("number of clusters must be at least 1"),
            None => param(format!("method '{}' requires 'clusters'", self.name)),
        }
    }

    /// A label for reports, e.g. `mrmtl` or `ifca_g4`.
    pub fn label(&self) -> String {
        match self.clusters {
            Some(g) => format!("{}_g{g}", self.name),
            None => self.name.clone(),
        }
    }
}

pub(crate) fn fraction(name: &str, value: Option<f64>, default: f64, allow_zero: bool) -> Result<f64> {
    let v = value.unwrap_or(default);
    let ok = if allow_zero { v >= 0.0 } else { v > 0.0 };
    if !(ok && v <= 1.0) {
        return param(format!("{name} must lie in {}0, 1], got {v}", if allow_zero { "[" } else { "(" }));
    }
    Ok(v)
}

/// How each silo's privacy is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrivacySetting {
    /// No noise and noiseless selection.
    NonPrivate,
    /// Per-silo (ε_k, δ_k) targets; noise is calibrated by the accountant.
    Budget {
        epsilon: PerSilo<f64>,
        delta: PerSilo<f64>,
    },
    /// A fixed noise multiplier for every silo, without a budget. Selection
    /// uses `selection_epsilon` per round, or is noiseless when absent.
    NoiseMultiplier {
        sigma: f64,
        #[serde(default)]
        selection_epsilon: Option<f64>,
    },
}

impl PrivacySetting {
    pub fn uniform(epsilon: f64, delta: f64) -> Self {
        PrivacySetting::Budget {
            epsilon: PerSilo::Uniform(epsilon),
            delta: PerSilo::Uniform(delta),
        }
    }
}

fn default_weighted() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    pub method: MethodSpec,
    pub rounds: usize,
    pub privacy: PrivacySetting,
    pub clip: f64,
    pub sampling_rate: f64,
    pub learning_rate: f64,
    /// Weight silo updates by training-set size.
    #[serde(default = "default_weighted")]
    pub weighted_aggregation: bool,
    /// Loss override; by default hinge for two classes, softmax for more
    /// and squared error for regression.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossKind>,
}

impl TrainerConfig {
    pub fn new(method: MethodSpec, rounds: usize, privacy: PrivacySetting) -> Self {
        Self {
            method,
            rounds,
            privacy,
            clip: 1.0,
            sampling_rate: 1.0,
            learning_rate: 0.1,
            weighted_aggregation: true,
            loss: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return param("rounds must be at least 1");
        }
        // Noise multiplier is checked by the plan; 0 is a valid placeholder.
        DpSgdConfig::new(self.clip, 0.0, self.sampling_rate, self.learning_rate)?;
        match &self.privacy {
            PrivacySetting::NonPrivate => {}
            PrivacySetting::NoiseMultiplier { sigma, selection_epsilon } => {
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    return param(format!("noise multiplier must be non-negative, got {sigma}"));
                }
                if let Some(e) = selection_epsilon {
                    if !(*e > 0.0) {
                        return param(format!("selection epsilon must be positive, got {e}"));
                    }
                }
            }
            PrivacySetting::Budget { .. } => {}
        }
        Ok(())
    }
}

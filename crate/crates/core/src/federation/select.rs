use rand::Rng;
use rand_distr::{Distribution, Gumbel};

use crate::data::SiloDataset;
use crate::error::{param, Result};
use crate::model::{evaluate, LinearModel, LossKind};

/// Sensitivity of a silo's error rate, `1/(n-1)`.
pub fn error_rate_sensitivity(n: usize) -> Result<f64> {
    if n < 2 {
        return param(format!("error-rate sensitivity is undefined for n = {n}"));
    }
    Ok(1.0 / (n as f64 - 1.0))
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Report Noisy Min: subtracts Gumbel noise of scale `2Δ/ε` from each score
/// and returns the index of the smallest. `epsilon = None` means no noise;
/// ties go to the lowest index.
pub fn report_noisy_min<R: Rng + ?Sized>(
    scores: &[f64],
    epsilon: Option<f64>,
    sensitivity: f64,
    rng: &mut R,
) -> Result<usize> {
    if scores.is_empty() {
        return param("selection needs at least one candidate");
    }
    let Some(eps) = epsilon else {
        return Ok(argmin(scores));
    };
    if !(eps > 0.0) || !(sensitivity > 0.0) {
        return param("selection epsilon and sensitivity must be positive");
    }
    if eps.is_infinite() {
        return Ok(argmin(scores));
    }
    let gumbel = Gumbel::new(0.0, 2.0 * sensitivity / eps).map_err(|e| crate::Error::Parameter(e.to_string()))?;
    let noisy: Vec<f64> = scores.iter().map(|s| s - gumbel.sample(rng)).collect();
    Ok(argmin(&noisy))
}

/// Selection probabilities of the exponential mechanism over negated
/// scores: `P(g) ∝ exp(-ε s_g / (2Δ))`.
pub fn em_probabilities(scores: &[f64], epsilon: f64, sensitivity: f64) -> Vec<f64> {
    let k = epsilon / (2.0 * sensitivity);
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = scores.iter().map(|s| (-k * (s - min)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Picks the cluster model with the lowest error rate on `data`, privately
/// when `epsilon` is given. A single model is returned without touching the
/// data or the generator.
pub fn private_cluster_select<R: Rng + ?Sized>(
    data: &SiloDataset,
    models: &[LinearModel],
    loss: LossKind,
    epsilon: Option<f64>,
    rng: &mut R,
) -> Result<usize> {
    if models.len() == 1 {
        return Ok(0);
    }
    if !loss.is_classification() {
        return param("private cluster selection scores by error rate and needs a classification loss");
    }
    let sensitivity = error_rate_sensitivity(data.len())?;
    let errors = models
        .iter()
        .map(|m| evaluate(m, loss, data).map(|e| e.metric))
        .collect::<Result<Vec<_>>>()?;
    report_noisy_min(&errors, epsilon, sensitivity, rng)
}

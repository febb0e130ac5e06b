use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{mrmtl_weight, Lambda, MeanEstProblem};
use crate::error::{param, Result};
use crate::rng;

const PARTITIONS: usize = 64;
const STREAM_TAG: u64 = 0x6d65_616e; // "mean"

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: usize,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors of the estimate.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_err
    }
}

/// Empirical MSE of MR-MTL's estimator at strength `lambda`.
pub fn simulate(
    problem: &MeanEstProblem,
    lambda: impl Into<Lambda>,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    Ok(simulate_grid(problem, &[lambda.into()], trials, seed)?[0])
}

/// Empirical MSE at every strength in `lambdas`, all evaluated on the same
/// simulated worlds so that differences across the grid are not swamped by
/// sampling noise.
///
/// Each trial draws silo centers `w_k ~ N(θ, τ²)`, `n_k` samples per silo,
/// clips them to `[-c, c]`, releases `ŵ_k = (ξ_k + Σ clip(x))/n_k` with
/// `ξ_k ~ N(0, σ_{k,DP}²)`, forms `α ŵ_k + (1-α) ŵ_{\k}` and records the
/// squared error against `w_k` averaged over silos.
pub fn simulate_grid(
    problem: &MeanEstProblem,
    lambdas: &[Lambda],
    trials: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    if trials == 0 {
        return param("simulation needs at least one trial");
    }
    let k = problem.silos();
    let weights = lambdas
        .iter()
        .map(|&l| mrmtl_weight(l, k))
        .collect::<Result<Vec<_>>>()?;

    let parts = PARTITIONS.min(trials);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..parts)
        .into_par_iter()
        .map(|part| {
            let lo = part * trials / parts;
            let hi = (part + 1) * trials / parts;
            let mut rng = rng::stream(seed, &[STREAM_TAG, part as u64]);
            let mut sum = vec![0.0; weights.len()];
            let mut sum_sq = vec![0.0; weights.len()];
            let mut centers = vec![0.0; k];
            let mut estimates = vec![0.0; k];
            for _ in lo..hi {
                draw_world(problem, &mut rng, &mut centers, &mut estimates);
                let total: f64 = estimates.iter().sum();
                for (i, &alpha) in weights.iter().enumerate() {
                    let err = centers
                        .iter()
                        .zip(&estimates)
                        .map(|(&w, &own)| {
                            let external = (total - own) / (k as f64 - 1.0);
                            let d = w - (alpha * own + (1.0 - alpha) * external);
                            d * d
                        })
                        .sum::<f64>()
                        / k as f64;
                    sum[i] += err;
                    sum_sq[i] += err * err;
                }
            }
            (sum, sum_sq)
        })
        .collect();

    let mut sum = vec![0.0; weights.len()];
    let mut sum_sq = vec![0.0; weights.len()];
    for (s, sq) in &partials {
        for i in 0..weights.len() {
            sum[i] += s[i];
            sum_sq[i] += sq[i];
        }
    }
    let t = trials as f64;
    Ok(sum
        .iter()
        .zip(&sum_sq)
        .map(|(&s, &sq)| {
            let mean = s / t;
            let var = if trials > 1 {
                ((sq - t * mean * mean) / (t - 1.0)).max(0.0)
            } else {
                0.0
            };
            McEstimate {
                mean,
                std_err: (var / t).sqrt(),
                trials,
            }
        })
        .collect())
}

fn draw_world<R: Rng>(problem: &MeanEstProblem, rng: &mut R, centers: &mut [f64], estimates: &mut [f64]) {
    let tau = problem.heterogeneity().sqrt();
    let c = problem.clip();
    for k in 0..problem.silos() {
        let z: f64 = rng.sample(StandardNormal);
        let w = problem.meta_center() + tau * z;
        let sd = problem.data_var(k).sqrt();
        let n = problem.sample_count(k);
        let mut s = 0.0;
        for _ in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            s += (w + sd * e).clamp(-c, c);
        }
        let xi: f64 = rng.sample(StandardNormal);
        centers[k] = w;
        estimates[k] = (problem.dp_noise(k) * xi + s) / n as f64;
    }
}

//! Per-silo DP-SGD: Poisson subsampling, per-example clipping and Gaussian
//! noise, normalized by the expected batch size.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::SiloDataset;
use crate::error::{param, Result};
use crate::model::{example_loss_grad, LinearModel, LossKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpSgdConfig {
    pub clip: f64,
    pub noise_multiplier: f64,
    pub sampling_rate: f64,
    pub learning_rate: f64,
}

impl DpSgdConfig {
    pub fn new(clip: f64, noise_multiplier: f64, sampling_rate: f64, learning_rate: f64) -> Result<Self> {
        let cfg = Self {
            clip,
            noise_multiplier,
            sampling_rate,
            learning_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip.is_finite() && self.clip > 0.0) {
            return param(format!("clip bound must be positive, got {}", self.clip));
        }
        if !(self.noise_multiplier.is_finite() && self.noise_multiplier >= 0.0) {
            return param(format!("noise multiplier must be non-negative, got {}", self.noise_multiplier));
        }
        if !(self.sampling_rate > 0.0 && self.sampling_rate <= 1.0) {
            return param(format!("sampling rate must lie in (0, 1], got {}", self.sampling_rate));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return param(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        Ok(())
    }

    /// Steps in one local epoch, `⌈1/q⌉`.
    pub fn steps_per_round(&self) -> usize {
        steps_per_epoch(self.sampling_rate)
    }
}

/// `⌈1/q⌉`, robust to `1/q` landing a hair above an integer.
pub fn steps_per_epoch(q: f64) -> usize {
    ((1.0 / q) - 1e-9).ceil().max(1.0) as usize
}

/// Proximal pull `λ(w - center)` added to each per-example gradient before
/// clipping.
#[derive(Debug, Clone, Copy)]
pub struct Prox<'a> {
    pub lambda: f64,
    pub center: &'a [f64],
}

/// Records the noise vector injected at every step. Disabled ledgers
/// record nothing.
#[derive(Debug, Clone, Default)]
pub struct NoiseLedger {
    enabled: bool,
    entries: Vec<Vec<f64>>,
}

impl NoiseLedger {
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn enabled() -> Self {
        Self {
            enabled: true,
            entries: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Coordinate-wise sum of all recorded noise.
    pub fn total(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.entries.first().map_or(0, Vec::len)];
        for e in &self.entries {
            out.iter_mut().zip(e).for_each(|(a, b)| *a += b);
        }
        out
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn clip_in_place(g: &mut [f64], c: f64) {
    let n = norm(g);
    // Slack of a few ulps keeps clipping idempotent under rounding.
    if n > c * (1.0 + 4.0 * f64::EPSILON) {
        let s = c / n;
        g.iter_mut().for_each(|x| *x *= s);
    }
}

/// Scales `g` down to norm `c` if it is longer.
pub fn clip_to_norm(g: &[f64], c: f64) -> Vec<f64> {
    let mut out = g.to_vec();
    clip_in_place(&mut out, c);
    out
}

fn check(model: &LinearModel, loss: LossKind, data: &SiloDataset, prox: Option<Prox<'_>>) -> Result<()> {
    if model.outputs() != loss.outputs() || model.inputs() != data.dim() {
        return param("model, loss and data dimensions do not match");
    }
    if let Some(p) = prox {
        if p.center.len() != model.param_len() || !(p.lambda >= 0.0) {
            return param("proximal center has the wrong length or lambda is negative");
        }
    }
    Ok(())
}

fn add_clipped(
    sum: &mut [f64],
    grad: &mut [f64],
    params: &[f64],
    d: usize,
    loss: LossKind,
    x: &[f64],
    y: f64,
    clip: f64,
    prox: Option<Prox<'_>>,
) {
    example_loss_grad(params, d, loss, x, y, Some(grad));
    if let Some(p) = prox {
        for ((g, w), c) in grad.iter_mut().zip(params).zip(p.center) {
            *g += p.lambda * (w - c);
        }
    }
    clip_in_place(grad, clip);
    sum.iter_mut().zip(grad.iter()).for_each(|(s, g)| *s += g);
}

/// Sum of clipped per-example gradients over `indices`, before noise.
pub fn clipped_gradient_sum(
    model: &LinearModel,
    loss: LossKind,
    data: &SiloDataset,
    indices: &[usize],
    clip: f64,
    prox: Option<Prox<'_>>,
) -> Result<Vec<f64>> {
    check(model, loss, data, prox)?;
    let mut sum = vec![0.0; model.param_len()];
    let mut grad = vec![0.0; model.param_len()];
    for &i in indices {
        add_clipped(&mut sum, &mut grad, model.flatten(), model.inputs(), loss, data.row(i), data.label(i), clip, prox);
    }
    Ok(sum)
}

/// One DP-SGD step: each example joins the batch with probability `q`;
/// the clipped gradient sum plus `N(0, σ²c² I)` is divided by `q·n` and
/// scaled by the learning rate. An empty batch still releases noise.
pub fn private_step<R: Rng + ?Sized>(
    model: &LinearModel,
    loss: LossKind,
    data: &SiloDataset,
    cfg: &DpSgdConfig,
    prox: Option<Prox<'_>>,
    rng: &mut R,
    ledger: &mut NoiseLedger,
) -> Result<LinearModel> {
    cfg.validate()?;
    check(model, loss, data, prox)?;
    if data.is_empty() {
        return param(format!("silo '{}' has no training data", data.id()));
    }
    let p = model.param_len();
    let params = model.flatten();
    let mut sum = vec![0.0; p];
    let mut grad = vec![0.0; p];
    let full = cfg.sampling_rate >= 1.0;
    for i in 0..data.len() {
        if full || rng.random::<f64>() < cfg.sampling_rate {
            add_clipped(&mut sum, &mut grad, params, model.inputs(), loss, data.row(i), data.label(i), cfg.clip, prox);
        }
    }
    if cfg.noise_multiplier > 0.0 {
        let scale = cfg.noise_multiplier * cfg.clip;
        let noise: Vec<f64> = (0..p).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        sum.iter_mut().zip(&noise).for_each(|(s, z)| *s += z);
        if ledger.enabled {
            ledger.entries.push(noise);
        }
    } else if ledger.enabled {
        ledger.entries.push(vec![0.0; p]);
    }
    let step = cfg.learning_rate / (cfg.sampling_rate * data.len() as f64);
    let next: Vec<f64> = params.iter().zip(&sum).map(|(w, g)| w - step * g).collect();
    LinearModel::unflatten(model.inputs(), model.outputs(), next)
}

/// `⌈1/q⌉` private steps.
pub fn run_local_epoch<R: Rng + ?Sized>(
    model: &LinearModel,
    loss: LossKind,
    data: &SiloDataset,
    cfg: &DpSgdConfig,
    prox: Option<Prox<'_>>,
    rng: &mut R,
    ledger: &mut NoiseLedger,
) -> Result<LinearModel> {
    let mut m = model.clone();
    for _ in 0..cfg.steps_per_round() {
        m = private_step(&m, loss, data, cfg, prox, rng, ledger)?;
    }
    Ok(m)
}

/// Per-coordinate variance of the noise accumulated in the parameters over
/// `steps` full-batch private steps: `T·η²σ²c²/n²`.
pub fn random_walk_variance_check(cfg: &DpSgdConfig, n: usize, steps: usize) -> Result<f64> {
    cfg.validate()?;
    if steps == 0 || n == 0 {
        return param("need at least one step and one example");
    }
    let per_step = cfg.learning_rate * cfg.noise_multiplier * cfg.clip / n as f64;
    Ok(steps as f64 * per_step * per_step)
}

//! Linear models with per-example gradients for hinge, squared-error and
//! softmax cross-entropy losses.
//!
//! Parameters are handled as one flat vector: the `d × m` weight matrix in
//! column-major order (all weights of output 0, then output 1, ...),
//! followed by the `m` biases.

use serde::{Deserialize, Serialize};

use crate::data::SiloDataset;
use crate::error::{param, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Binary hinge loss. Labels `<= 0` are the negative class.
    Hinge,
    SquaredError,
    Softmax(usize),
}

impl LossKind {
    /// Number of model outputs.
    pub fn outputs(&self) -> usize {
        match self {
            LossKind::Softmax(c) => *c,
            _ => 1,
        }
    }

    pub fn is_classification(&self) -> bool {
        !matches!(self, LossKind::SquaredError)
    }

    fn validate(&self) -> Result<()> {
        match self {
            LossKind::Softmax(c) if *c < 2 => param("softmax needs at least 2 classes"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    inputs: usize,
    outputs: usize,
    params: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(inputs: usize, outputs: usize) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return param("model dimensions must be positive");
        }
        Ok(Self {
            inputs,
            outputs,
            params: vec![0.0; (inputs + 1) * outputs],
        })
    }

    pub fn for_loss(inputs: usize, loss: LossKind) -> Result<Self> {
        loss.validate()?;
        Self::zeros(inputs, loss.outputs())
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn param_len(&self) -> usize {
        self.params.len()
    }

    pub fn flatten(&self) -> &[f64] {
        &self.params
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.params
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn unflatten(inputs: usize, outputs: usize, params: Vec<f64>) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return param("model dimensions must be positive");
        }
        if params.len() != (inputs + 1) * outputs {
            return param(format!(
                "parameter vector has length {}, expected {}",
                params.len(),
                (inputs + 1) * outputs
            ));
        }
        Ok(Self {
            inputs,
            outputs,
            params,
        })
    }

    pub fn weight(&self, feature: usize, output: usize) -> f64 {
        self.params[output * self.inputs + feature]
    }

    pub fn bias(&self, output: usize) -> f64 {
        self.params[self.inputs * self.outputs + output]
    }

    /// Raw scores `Wᵀx + b`.
    pub fn scores(&self, x: &[f64], out: &mut [f64]) {
        scores(&self.params, self.inputs, self.outputs, x, out)
    }
}

fn scores(params: &[f64], d: usize, m: usize, x: &[f64], out: &mut [f64]) {
    let bias = &params[d * m..];
    for (j, o) in out.iter_mut().enumerate().take(m) {
        let w = &params[j * d..(j + 1) * d];
        *o = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias[j];
    }
}

fn hinge_sign(y: f64) -> f64 {
    if y > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Loss of one example and, when `grad` is given, its gradient written into
/// `grad` (overwritten, same layout as the flat parameters).
pub(crate) fn example_loss_grad(
    params: &[f64],
    d: usize,
    loss: LossKind,
    x: &[f64],
    y: f64,
    grad: Option<&mut [f64]>,
) -> f64 {
    let m = loss.outputs();
    match loss {
        LossKind::SquaredError => {
            let mut s = [0.0];
            scores(params, d, 1, x, &mut s);
            let r = s[0] - y;
            if let Some(g) = grad {
                for (gi, xi) in g[..d].iter_mut().zip(x) {
                    *gi = r * xi;
                }
                g[d] = r;
            }
            0.5 * r * r
        }
        LossKind::Hinge => {
            let mut s = [0.0];
            scores(params, d, 1, x, &mut s);
            let yy = hinge_sign(y);
            let margin = yy * s[0];
            if let Some(g) = grad {
                // Zero subgradient at the kink.
                if margin < 1.0 {
                    for (gi, xi) in g[..d].iter_mut().zip(x) {
                        *gi = -yy * xi;
                    }
                    g[d] = -yy;
                } else {
                    g.fill(0.0);
                }
            }
            (1.0 - margin).max(0.0)
        }
        LossKind::Softmax(c) => {
            let mut s = vec![0.0; c];
            scores(params, d, m, x, &mut s);
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = s.iter().map(|v| (v - max).exp()).sum();
            let label = y as usize;
            let loss = z.ln() + max - s[label];
            if let Some(g) = grad {
                for j in 0..c {
                    let p = (s[j] - max).exp() / z - if j == label { 1.0 } else { 0.0 };
                    for (gi, xi) in g[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *gi = p * xi;
                    }
                    g[d * c + j] = p;
                }
            }
            loss
        }
    }
}

fn check_batch(model: &LinearModel, loss: LossKind, data: &SiloDataset) -> Result<()> {
    loss.validate()?;
    if model.outputs != loss.outputs() {
        return param(format!(
            "model has {} outputs but the loss needs {}",
            model.outputs,
            loss.outputs()
        ));
    }
    if data.dim() != model.inputs {
        return param(format!(
            "data has {} features but the model expects {}",
            data.dim(),
            model.inputs
        ));
    }
    if let LossKind::Softmax(c) = loss {
        if data.labels().iter().any(|&y| y < 0.0 || y as usize >= c || y.fract() != 0.0) {
            return param(format!("softmax labels must be class indices in [0, {c})"));
        }
    }
    Ok(())
}

/// One flat gradient per example of `batch`.
pub fn per_example_gradients(model: &LinearModel, loss: LossKind, batch: &SiloDataset) -> Result<Vec<Vec<f64>>> {
    check_batch(model, loss, batch)?;
    if batch.is_empty() {
        return param("batch is empty");
    }
    Ok((0..batch.len())
        .map(|i| {
            let mut g = vec![0.0; model.param_len()];
            example_loss_grad(&model.params, model.inputs, loss, batch.row(i), batch.label(i), Some(&mut g));
            g
        })
        .collect())
}

/// Predicted label: class index for classification, the score for regression.
pub fn predict(model: &LinearModel, loss: LossKind, x: &[f64]) -> f64 {
    let mut s = vec![0.0; model.outputs];
    model.scores(x, &mut s);
    match loss {
        LossKind::SquaredError => s[0],
        LossKind::Hinge => {
            if s[0] >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
        LossKind::Softmax(_) => {
            let mut best = 0;
            for j in 1..s.len() {
                if s[j] > s[best] {
                    best = j;
                }
            }
            best as f64
        }
    }
}

/// Mean loss and error metric on a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// Misclassification rate for classification, mean squared error for
    /// regression.
    pub metric: f64,
}

pub fn evaluate(model: &LinearModel, loss: LossKind, data: &SiloDataset) -> Result<Evaluation> {
    check_batch(model, loss, data)?;
    if data.is_empty() {
        return param("cannot evaluate on an empty dataset");
    }
    let mut total_loss = 0.0;
    let mut total_metric = 0.0;
    for i in 0..data.len() {
        let (x, y) = (data.row(i), data.label(i));
        total_loss += example_loss_grad(&model.params, model.inputs, loss, x, y, None);
        let pred = predict(model, loss, x);
        total_metric += match loss {
            LossKind::SquaredError => (pred - y) * (pred - y),
            LossKind::Hinge => f64::from(u8::from(pred != if y > 0.0 { 1.0 } else { 0.0 })),
            LossKind::Softmax(_) => f64::from(u8::from(pred != y)),
        };
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        loss: total_loss / n,
        metric: total_metric / n,
    })
}

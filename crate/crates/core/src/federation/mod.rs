//! Multi-round federated training under per-silo sample-level privacy.
//!
//! Every silo privatizes its own updates with DP-SGD calibrated to its own
//! (ε, δ); the server only aggregates already-noised models. Methods are
//! [`Trainer`]s looked up by name in a [`TrainerRegistry`].

mod config;
mod plan;
mod select;
mod trainers;

pub use config::{MethodSpec, PrivacySetting, TrainerConfig};
pub use plan::{plan_privacy_for, realized_epsilon, PrivacyPlan, SiloPrivacy};
pub use select::{em_probabilities, error_rate_sensitivity, private_cluster_select, report_noisy_min};
pub use trainers::{
    Ditto, FedAvg, FedContext, FederationState, Finetune, Ifca, IfcaMrmtl, Local, Mrmtl, Trainer,
    TrainerFactory, TrainerRegistry,
};

use crate::data::{FederationData, SiloDataset, Task};
use crate::error::{param, Error, Result};
use crate::model::{evaluate, LinearModel, LossKind};

/// Loss used for a task unless the config overrides it.
pub fn default_loss(task: Task) -> LossKind {
    match task {
        Task::Regression => LossKind::SquaredError,
        Task::Classification { num_classes: 2 } => LossKind::Hinge,
        Task::Classification { num_classes } => LossKind::Softmax(num_classes),
    }
}

/// Plans privacy for a built-in method.
pub fn plan_privacy(config: &TrainerConfig, sizes: &[usize]) -> Result<PrivacyPlan> {
    let trainer = TrainerRegistry::builtin().build(&config.method)?;
    plan_privacy_for(trainer.as_ref(), config, sizes)
}

/// Test-count-weighted mean of each silo's metric on its own test set.
pub fn evaluate_federation(models: &[LinearModel], loss: LossKind, test: &[SiloDataset]) -> Result<f64> {
    Ok(evaluate_silos(models, loss, test)?.weighted)
}

struct SiloEval {
    loss: Vec<f64>,
    metric: Vec<f64>,
    weighted: f64,
    weighted_loss: f64,
}

fn evaluate_silos(models: &[LinearModel], loss: LossKind, sets: &[SiloDataset]) -> Result<SiloEval> {
    if models.len() != sets.len() || sets.is_empty() {
        return param("need one model per silo");
    }
    let mut out = SiloEval {
        loss: Vec::with_capacity(sets.len()),
        metric: Vec::with_capacity(sets.len()),
        weighted: 0.0,
        weighted_loss: 0.0,
    };
    let mut total = 0.0;
    for (m, d) in models.iter().zip(sets) {
        let e = evaluate(m, loss, d)?;
        let w = d.len() as f64;
        out.weighted += w * e.metric;
        out.weighted_loss += w * e.loss;
        total += w;
        out.loss.push(e.loss);
        out.metric.push(e.metric);
    }
    out.weighted /= total;
    out.weighted_loss /= total;
    Ok(out)
}

/// Metrics after one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    /// 1-based index of the completed round.
    pub round: usize,
    pub train_loss: Vec<f64>,
    pub train_metric: Vec<f64>,
    pub test_metric: Vec<f64>,
    /// Weighted by training-set sizes.
    pub weighted_train_metric: f64,
    pub weighted_train_loss: f64,
    /// Weighted by test-set sizes.
    pub weighted_test_metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub method: String,
    /// Recorded rounds; the final round is always last.
    pub rounds: Vec<RoundMetrics>,
    pub noise_multipliers: Vec<f64>,
    /// ε spent by each silo at its δ, recomputed from the steps and
    /// selections actually run. Infinite for non-private runs.
    pub realized_epsilon: Vec<f64>,
    pub final_state: FederationState,
}

impl RunReport {
    pub fn last(&self) -> &RoundMetrics {
        self.rounds.last().expect("at least one round recorded")
    }

    pub fn final_test_metric(&self) -> f64 {
        self.last().weighted_test_metric
    }

    pub fn final_train_metric(&self) -> f64 {
        self.last().weighted_train_metric
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Record metrics every this many rounds (the final round is always
    /// recorded).
    pub record_every: Option<usize>,
}

/// Runs a built-in method.
pub fn run(config: &TrainerConfig, data: &FederationData, seed: u64) -> Result<RunReport> {
    run_with(config, data, seed, &RunOptions::default())
}

pub fn run_with(config: &TrainerConfig, data: &FederationData, seed: u64, opts: &RunOptions) -> Result<RunReport> {
    run_trainer(TrainerRegistry::builtin().build(&config.method)?.as_ref(), config, data, seed, opts)
}

pub fn run_trainer(
    trainer: &dyn Trainer,
    config: &TrainerConfig,
    data: &FederationData,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunReport> {
    let plan = plan_privacy_for(trainer, config, &data.train_sizes())?;
    let loss = config.loss.unwrap_or_else(|| default_loss(data.task));
    if loss.is_classification() != data.task.is_classification() {
        return param("loss does not match the task");
    }
    let ctx = FedContext {
        data,
        loss,
        plan: &plan,
        rounds: config.rounds,
        seed,
        weighted: config.weighted_aggregation,
    };
    let mut state = trainer.init(&ctx)?;
    let mut rounds = Vec::new();
    for t in 1..=config.rounds {
        trainer.round(&mut state, &ctx)?;
        let record = t == config.rounds || opts.record_every.is_some_and(|e| e > 0 && t % e == 0);
        if record {
            let models = trainer.deployed(&state, &ctx);
            let train = evaluate_silos(&models, loss, &data.train)?;
            let test = evaluate_silos(&models, loss, &data.test)?;
            rounds.push(RoundMetrics {
                round: t,
                train_loss: train.loss,
                train_metric: train.metric,
                test_metric: test.metric,
                weighted_train_metric: train.weighted,
                weighted_train_loss: train.weighted_loss,
                weighted_test_metric: test.weighted,
            });
        }
    }

    let realized = plan
        .silos
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let steps = (state.epochs_run[k] * s.dp.steps_per_round()) as u64;
            realized_epsilon(s, steps, state.selections_run[k])
        })
        .collect::<Result<Vec<_>>>()?;
    for (k, (s, &e)) in plan.silos.iter().zip(&realized).enumerate() {
        if let Some(b) = s.budget {
            if !(e <= b.epsilon()) {
                return Err(Error::InfeasiblePlan(format!(
                    "silo {k} spent epsilon {e}, above its budget {}",
                    b.epsilon()
                )));
            }
        }
    }
    Ok(RunReport {
        method: config.method.label(),
        rounds,
        noise_multipliers: plan.noise_multipliers(),
        realized_epsilon: realized,
        final_state: state,
    })
}

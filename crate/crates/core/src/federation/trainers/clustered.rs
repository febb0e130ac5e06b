use rayon::prelude::*;

use super::{fraction_of_rounds, FedContext, FederationState, Trainer, PURPOSE_SELECT, PURPOSE_TRAIN};
use crate::error::{param, Result};
use crate::federation::config::{fraction, MethodSpec};
use crate::federation::select::private_cluster_select;
use crate::model::LinearModel;

const DEFAULT_EPS_SELECT_FRACTION: f64 = 0.03;
const DEFAULT_CLUSTER_ROUNDS_FRACTION: f64 = 0.1;
const DEFAULT_PRECONDITION_FRACTION: f64 = 0.05;

fn check_classification(g: usize, ctx: &FedContext<'_>) -> Result<()> {
    if g > 1 && !ctx.loss.is_classification() {
        return param("cluster selection scores by error rate and needs a classification task");
    }
    Ok(())
}

fn clustered_init(g: usize, ctx: &FedContext<'_>) -> Result<FederationState> {
    check_classification(g, ctx)?;
    let mut s = FederationState::new(ctx)?;
    s.clusters = ctx.cluster_inits(g)?;
    Ok(s)
}

/// Silos pick a cluster (when `selecting`) and train it for one epoch; each
/// cluster model then averages the updates of its members. Returns the
/// per-silo trained models.
fn ifca_round(state: &mut FederationState, ctx: &FedContext<'_>, selecting: bool) -> Result<Vec<LinearModel>> {
    let g = state.clusters.len();
    let clusters = std::mem::take(&mut state.clusters);
    if selecting && g > 1 {
        let round = state.round;
        state.assignments = (0..ctx.silos())
            .into_par_iter()
            .map(|k| {
                let mut r = ctx.rng(k, round, PURPOSE_SELECT);
                let eps = ctx.plan.silos[k].selection_epsilon;
                private_cluster_select(&ctx.data.train[k], &clusters, ctx.loss, eps, &mut r)
            })
            .collect::<Result<Vec<_>>>()?;
        state.selections_run.iter_mut().for_each(|s| *s += 1);
    }
    let assign = &state.assignments;
    let updated = ctx.epochs(state.round, PURPOSE_TRAIN, 0.0, |k| &clusters[assign[k]], |_| None)?;
    state.clusters = aggregate_clusters(ctx, &clusters, assign, &updated);
    state.count_epochs(1);
    Ok(updated)
}

fn aggregate_clusters(
    ctx: &FedContext<'_>,
    clusters: &[LinearModel],
    assign: &[usize],
    updated: &[LinearModel],
) -> Vec<LinearModel> {
    (0..clusters.len())
        .map(|c| {
            let members: Vec<usize> = (0..assign.len()).filter(|&k| assign[k] == c).collect();
            ctx.aggregate(&clusters[c], &members, updated, |k| &clusters[assign[k]])
        })
        .collect()
}

/// Iterative federated clustering with private cluster selection in the
/// first `⌈f·T⌉` rounds; later rounds keep the last assignment.
pub struct Ifca {
    clusters: usize,
    eps_select_fraction: f64,
    cluster_rounds_fraction: f64,
}

impl Ifca {
    pub fn build(spec: &MethodSpec) -> Result<Box<dyn Trainer>> {
        spec.expect_only(&["clusters", "eps_select_fraction", "cluster_rounds_fraction"])?;
        Ok(Box::new(Ifca {
            clusters: spec.require_clusters()?,
            eps_select_fraction: fraction("eps_select_fraction", spec.eps_select_fraction, DEFAULT_EPS_SELECT_FRACTION, false)?,
            cluster_rounds_fraction: fraction(
                "cluster_rounds_fraction",
                spec.cluster_rounds_fraction,
                DEFAULT_CLUSTER_ROUNDS_FRACTION,
                false,
            )?,
        }))
    }
}

impl Trainer for Ifca {
    fn name(&self) -> &str {
        "ifca"
    }

    fn selection_rounds(&self, rounds: usize) -> usize {
        if self.clusters > 1 {
            fraction_of_rounds(self.cluster_rounds_fraction, rounds)
        } else {
            0
        }
    }

    fn selection_fraction(&self) -> Option<f64> {
        Some(self.eps_select_fraction)
    }

    fn init(&self, ctx: &FedContext<'_>) -> Result<FederationState> {
        clustered_init(self.clusters, ctx)
    }

    fn round(&self, state: &mut FederationState, ctx: &FedContext<'_>) -> Result<()> {
        let selecting = state.round < self.selection_rounds(ctx.rounds);
        ifca_round(state, ctx, selecting)?;
        state.round += 1;
        Ok(())
    }

    fn deployed(&self, state: &FederationState, _ctx: &FedContext<'_>) -> Vec<LinearModel> {
        state.assignments.iter().map(|&c| state.clusters[c].clone()).collect()
    }
}

/// IFCA for the first `⌈f·T⌉` rounds, then MR-MTL within each cluster:
/// silos keep their last assignment and regularize their personal model
/// toward their cluster's model.
pub struct IfcaMrmtl {
    clusters: usize,
    lambda: f64,
    eps_select_fraction: f64,
    precondition_fraction: f64,
}

impl IfcaMrmtl {
    pub fn build(spec: &MethodSpec) -> Result<Box<dyn Trainer>> {
        spec.expect_only(&["clusters", "lambda", "eps_select_fraction", "precondition_fraction"])?;
        Ok(Box::new(IfcaMrmtl {
            clusters: spec.require_clusters()?,
            lambda: spec.require_lambda()?,
            eps_select_fraction: fraction("eps_select_fraction", spec.eps_select_fraction, DEFAULT_EPS_SELECT_FRACTION, false)?,
            precondition_fraction: fraction(
                "precondition_fraction",
                spec.precondition_fraction,
                DEFAULT_PRECONDITION_FRACTION,
                true,
            )?,
        }))
    }

    fn precondition_rounds(&self, rounds: usize) -> usize {
        fraction_of_rounds(self.precondition_fraction, rounds)
    }
}

impl Trainer for IfcaMrmtl {
    fn name(&self) -> &str {
        "ifca_mrmtl"
    }

    fn selection_rounds(&self, rounds: usize) -> usize {
        if self.clusters > 1 {
            self.precondition_rounds(rounds)
        } else {
            0
        }
    }

    fn selection_fraction(&self) -> Option<f64> {
        Some(self.eps_select_fraction)
    }

    fn init(&self, ctx: &FedContext<'_>) -> Result<FederationState> {
        if self.clusters > 1 && self.precondition_rounds(ctx.rounds) == 0 {
            return param("more than one cluster needs at least one preconditioning round");
        }
        clustered_init(self.clusters, ctx)
    }

    fn round(&self, state: &mut FederationState, ctx: &FedContext<'_>) -> Result<()> {
        if state.round < self.precondition_rounds(ctx.rounds) {
            state.personal = ifca_round(state, ctx, true)?;
        } else {
            let clusters = std::mem::take(&mut state.clusters);
            let assign = &state.assignments;
            let personal = &state.personal;
            let updated = ctx.epochs(
                state.round,
                PURPOSE_TRAIN,
                self.lambda,
                |k| &personal[k],
                |k| Some(&clusters[assign[k]]),
            )?;
            state.clusters = aggregate_clusters(ctx, &clusters, assign, &updated);
            state.personal = updated;
            state.count_epochs(1);
        }
        state.round += 1;
        Ok(())
    }

    fn deployed(&self, state: &FederationState, _ctx: &FedContext<'_>) -> Vec<LinearModel> {
        state.personal.clone()
    }
}

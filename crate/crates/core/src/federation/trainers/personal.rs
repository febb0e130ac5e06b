use super::global::{fedavg_init, fedavg_round};
use super::{FedContext, FederationState, Trainer, PURPOSE_PERSONAL, PURPOSE_TRAIN};
use crate::error::Result;
use crate::federation::config::MethodSpec;
use crate::model::LinearModel;

/// Mean-regularized multi-task learning: each silo keeps its own model and
/// is pulled toward the average of all silo models with strength λ.
pub struct Mrmtl {
    lambda: f64,
}

impl Mrmtl {
    pub fn build(spec: &MethodSpec) -> Result<Box<dyn Trainer>> {
        spec.expect_only(&["lambda"])?;
        Ok(Box::new(Mrmtl {
            lambda: spec.require_lambda()?,
        }))
    }
}

impl Trainer for Mrmtl {
    fn name(&self) -> &str {
        "mrmtl"
    }

    fn init(&self, ctx: &FedContext<'_>) -> Result<FederationState> {
        let mut s = FederationState::new(ctx)?;
        s.global = Some(ctx.zero_model()?);
        Ok(s)
    }

    fn round(&self, state: &mut FederationState, ctx: &FedContext<'_>) -> Result<()> {
        let mean = state.global().clone();
        let personal = &state.personal;
        let updated = ctx.epochs(state.round, PURPOSE_TRAIN, self.lambda, |k| &personal[k], |_| Some(&mean))?;
        let all: Vec<usize> = (0..ctx.silos()).collect();
        state.global = Some(ctx.aggregate(&mean, &all, &updated, |k| &personal[k]));
        state.personal = updated;
        state.count_epochs(1);
        state.round += 1;
        Ok(())
    }

    fn deployed(&self, state: &FederationState, _ctx: &FedContext<'_>) -> Vec<LinearModel> {
        state.personal.clone()
    }
}

/// Ditto with the FedAvg solver: a global epoch, then a personal epoch
/// regularized toward the global model received this round. Both epochs
/// are privatized.
pub struct Ditto {
    lambda: f64,
}

impl Ditto {
    pub fn build(spec: &MethodSpec) -> Result<Box<dyn Trainer>> {
        spec.expect_only(&["lambda"])?;
        Ok(Box::new(Ditto {
            lambda: spec.require_lambda()?,
        }))
    }
}

impl Trainer for Ditto {
    fn name(&self) -> &str {
        "ditto"
    }

    fn epochs_per_round(&self) -> usize {
        2
    }

    fn init(&self, ctx: &FedContext<'_>) -> Result<FederationState> {
        fedavg_init(ctx)
    }

    fn round(&self, state: &mut FederationState, ctx: &FedContext<'_>) -> Result<()> {
        let received = fedavg_round(state, ctx)?;
        let personal = &state.personal;
        state.personal = ctx.epochs(state.round, PURPOSE_PERSONAL, self.lambda, |k| &personal[k], |_| Some(&received))?;
        state.count_epochs(1);
        state.round += 1;
        Ok(())
    }

    fn deployed(&self, state: &FederationState, _ctx: &FedContext<'_>) -> Vec<LinearModel> {
        state.personal.clone()
    }
}

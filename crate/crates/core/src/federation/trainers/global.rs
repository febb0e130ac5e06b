use super::{fraction_of_rounds, FedContext, FederationState, Trainer, PURPOSE_TRAIN};
use crate::error::Result;
use crate::federation::config::{fraction, MethodSpec};
use crate::model::LinearModel;

/// Each silo trains alone.
pub struct Local;

impl Local {
    pub fn build(spec: &MethodSpec) -> Result<Box<dyn Trainer>> {
        spec.expect_only(&[])?;
        Ok(Box::new(Local))
    }
}

pub(crate) fn local_round(state: &mut FederationState, ctx: &FedContext<'_>) -> Result<()> {
    let personal = &state.personal;
    state.personal = ctx.epochs(state.round, PURPOSE_TRAIN, 0.0, |k| &personal[k], |_| None)?;
    state.count_epochs(1);
    Ok(())
}

impl Trainer for Local {
    fn name(&self) -> &str {
        "local"
    }

    fn init(&self, ctx: &FedContext<'_>) -> Result<FederationState> {
        FederationState::new(ctx)
    }

    fn round(&self, state: &mut FederationState, ctx: &FedContext<'_>) -> Result<()> {
        local_round(state, ctx)?;
        state.round += 1;
        Ok(())
    }

    fn deployed(&self, state: &FederationState, _ctx: &FedContext<'_>) -> Vec<LinearModel> {
        state.personal.clone()
    }
}

/// One shared model trained by averaging silo updates.
pub struct FedAvg;

impl FedAvg {
    pub fn build(spec: &MethodSpec) -> Result<Box<dyn Trainer>> {
        spec.expect_only(&[])?;
        Ok(Box::new(FedAvg))
    }
}

pub(crate) fn fedavg_init(ctx: &FedContext<'_>) -> Result<FederationState> {
    let mut s = FederationState::new(ctx)?;
    s.global = Some(ctx.zero_model()?);
    Ok(s)
}

/// A FedAvg round on the global model. Returns the model the silos started
/// from.
pub(crate) fn fedavg_round(state: &mut FederationState, ctx: &FedContext<'_>) -> Result<LinearModel> {
    let global = state.global().clone();
    let updated = ctx.epochs(state.round, PURPOSE_TRAIN, 0.0, |_| &global, |_| None)?;
    let all: Vec<usize> = (0..ctx.silos()).collect();
    state.global = Some(ctx.aggregate(&global, &all, &updated, |_| &global));
    state.count_epochs(1);
    Ok(global)
}

impl Trainer for FedAvg {
    fn name(&self) -> &str {
        "fedavg"
    }

    fn init(&self, ctx: &FedContext<'_>) -> Result<FederationState> {
        fedavg_init(ctx)
    }

    fn round(&self, state: &mut FederationState, ctx: &FedContext<'_>) -> Result<()> {
        fedavg_round(state, ctx)?;
        state.round += 1;
        Ok(())
    }

    fn deployed(&self, state: &FederationState, ctx: &FedContext<'_>) -> Vec<LinearModel> {
        vec![state.global().clone(); ctx.silos()]
    }
}

/// FedAvg for the first `⌈f·T⌉` rounds, then local training starting from
/// the global model.
pub struct Finetune {
    switch_fraction: f64,
}

impl Finetune {
    pub fn build(spec: &MethodSpec) -> Result<Box<dyn Trainer>> {
        spec.expect_only(&["switch_fraction"])?;
        Ok(Box::new(Finetune {
            switch_fraction: fraction("switch_fraction", spec.switch_fraction, 0.5, true)?,
        }))
    }

    /// First round of local training.
    pub fn switch_round(&self, rounds: usize) -> usize {
        fraction_of_rounds(self.switch_fraction, rounds)
    }
}

impl Trainer for Finetune {
    fn name(&self) -> &str {
        "finetune"
    }

    fn init(&self, ctx: &FedContext<'_>) -> Result<FederationState> {
        fedavg_init(ctx)
    }

    fn round(&self, state: &mut FederationState, ctx: &FedContext<'_>) -> Result<()> {
        let switch = self.switch_round(ctx.rounds);
        if state.round < switch {
            fedavg_round(state, ctx)?;
        } else {
            if state.round == switch {
                let g = state.global().clone();
                state.personal = vec![g; ctx.silos()];
            }
            local_round(state, ctx)?;
        }
        state.round += 1;
        Ok(())
    }

    fn deployed(&self, state: &FederationState, ctx: &FedContext<'_>) -> Vec<LinearModel> {
        if state.round > self.switch_round(ctx.rounds) {
            state.personal.clone()
        } else {
            vec![state.global().clone(); ctx.silos()]
        }
    }
}

//! Federated training methods behind one trait, looked up by name.

mod clustered;
mod global;
mod personal;

pub use clustered::{Ifca, IfcaMrmtl};
pub use global::{FedAvg, Finetune, Local};
pub use personal::{Ditto, Mrmtl};

use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::config::MethodSpec;
use super::plan::PrivacyPlan;
use crate::data::FederationData;
use crate::dp_sgd::{run_local_epoch, NoiseLedger, Prox};
use crate::error::{param, Result};
use crate::model::{LinearModel, LossKind};
use crate::rng::{self, StreamRng};

/// RNG purposes within a (silo, round) pair.
pub(crate) const PURPOSE_TRAIN: u64 = 0;
pub(crate) const PURPOSE_PERSONAL: u64 = 1;
pub(crate) const PURPOSE_SELECT: u64 = 2;
const PURPOSE_INIT: u64 = 3;

/// Everything fixed for the duration of one run.
pub struct FedContext<'a> {
    pub data: &'a FederationData,
    pub loss: LossKind,
    pub plan: &'a PrivacyPlan,
    pub rounds: usize,
    pub seed: u64,
    pub weighted: bool,
}

impl FedContext<'_> {
    pub fn silos(&self) -> usize {
        self.data.silos()
    }

    pub(crate) fn rng(&self, silo: usize, round: usize, purpose: u64) -> StreamRng {
        rng::stream(self.seed, &[silo as u64, round as u64, purpose])
    }

    pub(crate) fn zero_model(&self) -> Result<LinearModel> {
        LinearModel::for_loss(self.data.dim(), self.loss)
    }

    /// One local epoch on every silo in parallel. `start(k)` is the model
    /// silo `k` starts from and `center(k)` its proximal center, if any.
    pub(crate) fn epochs<'m>(
        &self,
        round: usize,
        purpose: u64,
        lambda: f64,
        start: impl Fn(usize) -> &'m LinearModel + Sync,
        center: impl Fn(usize) -> Option<&'m LinearModel> + Sync,
    ) -> Result<Vec<LinearModel>> {
        (0..self.silos())
            .into_par_iter()
            .map(|k| {
                let prox = match center(k) {
                    Some(c) if lambda > 0.0 => Some(Prox {
                        lambda,
                        center: c.flatten(),
                    }),
                    _ => None,
                };
                let mut r = self.rng(k, round, purpose);
                run_local_epoch(
                    start(k),
                    self.loss,
                    &self.data.train[k],
                    &self.plan.silos[k].dp,
                    prox,
                    &mut r,
                    &mut NoiseLedger::disabled(),
                )
            })
            .collect()
    }

    /// `base + Σ_k w_k Δ_k / Σ_k w_k` over `members`, where `Δ_k` is
    /// `updated[k] - from(k)` and `w_k` is the training-set size (or 1).
    /// Returns `base` unchanged when `members` is empty.
    pub(crate) fn aggregate<'m>(
        &self,
        base: &LinearModel,
        members: &[usize],
        updated: &[LinearModel],
        from: impl Fn(usize) -> &'m LinearModel,
    ) -> LinearModel {
        if members.is_empty() {
            return base.clone();
        }
        let mut acc = vec![0.0; base.param_len()];
        let mut total = 0.0;
        for &k in members {
            let w = if self.weighted {
                self.data.train[k].len() as f64
            } else {
                1.0
            };
            total += w;
            for ((a, u), f) in acc.iter_mut().zip(updated[k].flatten()).zip(from(k).flatten()) {
                *a += w * (u - f);
            }
        }
        let mut next = base.clone();
        next.flat_mut()
            .iter_mut()
            .zip(&acc)
            .for_each(|(p, a)| *p += a / total);
        next
    }

    /// `g` models with `N(0, 0.01²)` parameters drawn from distinct streams,
    /// or the zero model when `g == 1`.
    pub(crate) fn cluster_inits(&self, g: usize) -> Result<Vec<LinearModel>> {
        let zero = self.zero_model()?;
        if g == 1 {
            return Ok(vec![zero]);
        }
        let normal = Normal::new(0.0, 1e-2).expect("valid normal");
        Ok((0..g)
            .map(|c| {
                let mut r = rng::stream(self.seed, &[PURPOSE_INIT, c as u64]);
                let mut m = zero.clone();
                m.flat_mut().iter_mut().for_each(|p| *p = normal.sample(&mut r));
                m
            })
            .collect())
    }
}

/// Mutable training state shared by all methods; each uses the fields its
/// topology needs.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationState {
    /// Personalized model per silo.
    pub personal: Vec<LinearModel>,
    /// Global model (FedAvg, Ditto, finetuning) or mean model (MR-MTL).
    pub global: Option<LinearModel>,
    pub clusters: Vec<LinearModel>,
    /// Last cluster chosen by each silo.
    pub assignments: Vec<usize>,
    /// Completed rounds.
    pub round: usize,
    /// Local epochs run per silo.
    pub epochs_run: Vec<usize>,
    /// Private selections made per silo.
    pub selections_run: Vec<usize>,
}

impl FederationState {
    pub(crate) fn new(ctx: &FedContext<'_>) -> Result<Self> {
        let zero = ctx.zero_model()?;
        let k = ctx.silos();
        Ok(Self {
            personal: vec![zero; k],
            global: None,
            clusters: Vec::new(),
            assignments: vec![0; k],
            round: 0,
            epochs_run: vec![0; k],
            selections_run: vec![0; k],
        })
    }

    pub(crate) fn count_epochs(&mut self, n: usize) {
        self.epochs_run.iter_mut().for_each(|e| *e += n);
    }

    pub(crate) fn global(&self) -> &LinearModel {
        self.global.as_ref().expect("global model initialized")
    }
}

/// A federated training method.
pub trait Trainer: Send + Sync {
    fn name(&self) -> &str;

    /// DP-SGD epochs each silo runs per round.
    fn epochs_per_round(&self) -> usize {
        1
    }

    /// Rounds, out of `rounds`, in which silos make a private selection.
    fn selection_rounds(&self, _rounds: usize) -> usize {
        0
    }

    /// Fraction of a silo's ε spent by each private selection.
    fn selection_fraction(&self) -> Option<f64> {
        None
    }

    fn init(&self, ctx: &FedContext<'_>) -> Result<FederationState>;

    /// Runs round `state.round` and advances the counter.
    fn round(&self, state: &mut FederationState, ctx: &FedContext<'_>) -> Result<()>;

    /// The model each silo would use for prediction now.
    fn deployed(&self, state: &FederationState, ctx: &FedContext<'_>) -> Vec<LinearModel>;
}

pub type TrainerFactory = fn(&MethodSpec) -> Result<Box<dyn Trainer>>;

/// Trainer constructors keyed by method name.
#[derive(Clone)]
pub struct TrainerRegistry {
    factories: BTreeMap<String, TrainerFactory>,
}

impl TrainerRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("local", Local::build);
        r.register("fedavg", FedAvg::build);
        r.register("mrmtl", Mrmtl::build);
        r.register("ditto", Ditto::build);
        r.register("finetune", Finetune::build);
        r.register("ifca", Ifca::build);
        r.register("ifca_mrmtl", IfcaMrmtl::build);
        r
    }

    pub fn register(&mut self, name: &str, factory: TrainerFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, spec: &MethodSpec) -> Result<Box<dyn Trainer>> {
        match self.factories.get(&spec.name) {
            Some(f) => f(spec),
            None => param(format!(
                "unknown method '{}' (known: {})",
                spec.name,
                self.names().collect::<Vec<_>>().join(", ")
            )),
        }
    }
}

impl Default for TrainerRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// `⌈f·T⌉`, robust to `f·T` landing a hair above an integer.
pub(crate) fn fraction_of_rounds(f: f64, rounds: usize) -> usize {
    ((f * rounds as f64 - 1e-9).ceil().max(0.0) as usize).min(rounds)
}

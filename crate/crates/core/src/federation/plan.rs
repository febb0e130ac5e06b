use super::config::{PrivacySetting, TrainerConfig};
use super::trainers::Trainer;
use crate::dp_sgd::{steps_per_epoch, DpSgdConfig};
use crate::error::{param, Error, Result};
use crate::privacy::{
    calibrate_noise_multiplier_with, em_selection_curve, rdp_compose, rdp_to_approx_dp,
    subsampled_gaussian_curve, PrivacyBudget, RdpCurve, SubsampledGaussianEvent,
};

/// Privacy parameters of one silo for a whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct SiloPrivacy {
    pub dp: DpSgdConfig,
    /// Target, if the silo runs under a budget.
    pub budget: Option<PrivacyBudget>,
    /// Planned DP-SGD steps over the run.
    pub steps: u64,
    /// Planned private selection rounds.
    pub selection_rounds: usize,
    /// ε of each private selection; `None` selects without noise.
    pub selection_epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyPlan {
    pub silos: Vec<SiloPrivacy>,
}

impl PrivacyPlan {
    pub fn noise_multipliers(&self) -> Vec<f64> {
        self.silos.iter().map(|s| s.dp.noise_multiplier).collect()
    }
}

/// Calibrates every silo's DP-SGD noise so that all training steps of the
/// run, composed with the method's private selections, meet that silo's
/// (ε, δ). Selections run at `eps_select_fraction · ε_k` each and are
/// accounted through the exponential mechanism's zCDP bound.
pub fn plan_privacy_for(trainer: &dyn Trainer, config: &TrainerConfig, sizes: &[usize]) -> Result<PrivacyPlan> {
    config.validate()?;
    let k = sizes.len();
    if k < 2 {
        return param("a federation needs at least 2 silos");
    }
    let per_epoch = steps_per_epoch(config.sampling_rate) as u64;
    let steps = config.rounds as u64 * trainer.epochs_per_round() as u64 * per_epoch;
    let selection_rounds = trainer.selection_rounds(config.rounds);
    let dp = |sigma: f64| DpSgdConfig::new(config.clip, sigma, config.sampling_rate, config.learning_rate);

    let silos = match &config.privacy {
        PrivacySetting::NonPrivate => (0..k)
            .map(|_| {
                Ok(SiloPrivacy {
                    dp: dp(0.0)?,
                    budget: None,
                    steps,
                    selection_rounds,
                    selection_epsilon: None,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        PrivacySetting::NoiseMultiplier { sigma, selection_epsilon } => (0..k)
            .map(|_| {
                Ok(SiloPrivacy {
                    dp: dp(*sigma)?,
                    budget: None,
                    steps,
                    selection_rounds,
                    selection_epsilon: *selection_epsilon,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        PrivacySetting::Budget { epsilon, delta } => {
            for (field, v) in [("epsilon", epsilon), ("delta", delta)] {
                if let crate::mean_est::PerSilo::Each(list) = v {
                    if list.len() != k {
                        return param(format!("{field} lists {} values for {k} silos", list.len()));
                    }
                }
            }
            let mut cache: Vec<((f64, f64), SiloPrivacy)> = Vec::new();
            let mut out = Vec::with_capacity(k);
            for s in 0..k {
                let key = (epsilon.get(s), delta.get(s));
                if let Some((_, p)) = cache.iter().find(|(kk, _)| *kk == key) {
                    out.push(p.clone());
                    continue;
                }
                let budget = PrivacyBudget::new(key.0, key.1)?;
                let (sel_eps, sel_curve) = match trainer.selection_fraction() {
                    Some(f) if selection_rounds > 0 => {
                        let e = f * budget.epsilon();
                        let curve = em_selection_curve(e)?.scaled(selection_rounds as f64);
                        let alone = rdp_to_approx_dp(&curve, budget.delta())?.epsilon;
                        if alone >= budget.epsilon() {
                            return Err(Error::InfeasiblePlan(format!(
                                "{selection_rounds} selection rounds at epsilon {e} already spend {alone} of silo {s}'s budget {}",
                                budget.epsilon()
                            )));
                        }
                        (Some(e), Some(curve))
                    }
                    _ => (None, None),
                };
                let sigma = calibrate_noise_multiplier_with(budget, steps, config.sampling_rate, sel_curve.as_ref())?;
                let p = SiloPrivacy {
                    dp: dp(sigma)?,
                    budget: Some(budget),
                    steps,
                    selection_rounds,
                    selection_epsilon: sel_eps,
                };
                cache.push((key, p.clone()));
                out.push(p);
            }
            out
        }
    };
    Ok(PrivacyPlan { silos })
}

/// ε actually spent at the silo's δ after `steps` DP-SGD steps and
/// `selections` private selections. Infinite without a budget or noise.
pub fn realized_epsilon(silo: &SiloPrivacy, steps: u64, selections: usize) -> Result<f64> {
    let Some(budget) = silo.budget else {
        return Ok(f64::INFINITY);
    };
    if silo.dp.noise_multiplier == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mut curves = Vec::new();
    if steps > 0 {
        let event = SubsampledGaussianEvent::new(silo.dp.sampling_rate, silo.dp.noise_multiplier, steps)?;
        curves.push(subsampled_gaussian_curve(&event, RdpCurve::standard_orders())?);
    }
    if let (Some(e), true) = (silo.selection_epsilon, selections > 0) {
        curves.push(em_selection_curve(e)?.scaled(selections as f64));
    }
    if curves.is_empty() {
        return Ok(0.0);
    }
    Ok(rdp_to_approx_dp(&rdp_compose(&curves)?, budget.delta())?.epsilon)
}

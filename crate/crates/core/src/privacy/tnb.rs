use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Parameters of the truncated negative binomial distribution over the
/// number of tuning runs `h ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TnbParams {
    eta: f64,
    gamma: f64,
}

impl TnbParams {
    pub fn new(eta: f64, gamma: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > -1.0) {
            return param(format!("TNB eta must exceed -1, got {eta}"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return param(format!("TNB gamma must lie in (0, 1), got {gamma}"));
        }
        Ok(Self { eta, gamma })
    }

    /// Solves for the γ that gives expected run count `mean` at this η.
    pub fn with_mean(eta: f64, mean: f64) -> Result<Self> {
        if !(mean.is_finite() && mean > 1.0) {
            return param(format!("expected run count must exceed 1, got {mean}"));
        }
        TnbParams::new(eta, 0.5)?;
        // E[h] decreases monotonically in γ; bisect on ln γ.
        let (mut lo, mut hi) = ((1e-15_f64).ln(), (1.0 - 1e-12_f64).ln());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let m = Self { eta, gamma: mid.exp() }.mean();
            if m > mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Self::new(eta, (0.5 * (lo + hi)).exp())
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Expected number of runs E[h].
    pub fn mean(&self) -> f64 {
        let (eta, g) = (self.eta, self.gamma);
        if eta == 0.0 {
            (1.0 / g - 1.0) / (1.0 / g).ln()
        } else {
            eta * (1.0 - g) / (g * (1.0 - g.powf(eta)))
        }
    }

    fn ln_pmf(&self, h: u64) -> f64 {
        let (eta, g) = (self.eta, self.gamma);
        let hf = h as f64;
        let ln_tail = hf * (-g).ln_1p();
        if eta == 0.0 {
            ln_tail - hf.ln() - (1.0 / g).ln().ln()
        } else {
            // The ℓ = 0 factor η and the normalizer γ^-η - 1 share a sign.
            let lead = (eta / (g.powf(-eta) - 1.0)).ln();
            let prod: f64 = (1..h).map(|l| ((l as f64 + eta) / (l as f64 + 1.0)).ln()).sum();
            ln_tail + lead + prod
        }
    }

    /// Probability mass at `h`.
    pub fn pmf(&self, h: u64) -> Result<f64> {
        if h == 0 {
            return param("TNB support starts at h = 1");
        }
        Ok(self.ln_pmf(h).exp())
    }

    /// Ratio f(h+1)/f(h), shared by both branches of the pmf.
    fn step_ratio(&self, h: u64) -> f64 {
        let hf = h as f64;
        (1.0 - self.gamma) * (hf + self.eta) / (hf + 1.0)
    }

    /// Draws a run count by sequential inversion of the CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let mut h = 1_u64;
        let mut mass = self.ln_pmf(1).exp();
        let mut cdf = mass;
        while cdf <= u {
            mass *= self.step_ratio(h);
            if mass <= 0.0 || !mass.is_finite() {
                break;
            }
            cdf += mass;
            h += 1;
        }
        h
    }
}

/// Probability of `h` runs together with the expected run count.
pub fn tnb_pmf_and_mean(params: &TnbParams, h: u64) -> Result<(f64, f64)> {
    Ok((params.pmf(h)?, params.mean()))
}

use serde::{Deserialize, Serialize};

use super::{PrivacyBudget, TnbParams};
use crate::error::{param, Error, Result};

/// Lower end of the noise-multiplier search range.
pub const SIGMA_SEARCH_MIN: f64 = 1e-2;
/// Upper end of the noise-multiplier search range.
pub const SIGMA_SEARCH_MAX: f64 = 1e4;

const BISECTION_STEPS: usize = 60;

/// Privacy loss ε(α) tabulated over an ascending grid of Rényi orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdpCurve {
    orders: Vec<f64>,
    eps: Vec<f64>,
}

impl RdpCurve {
    /// Integers 2..=64 followed by 128, 256 and 512.
    pub fn standard_orders() -> Vec<f64> {
        (2..=64)
            .map(f64::from)
            .chain([128.0, 256.0, 512.0])
            .collect()
    }

    pub fn new(orders: Vec<f64>, eps: Vec<f64>) -> Result<Self> {
        if orders.len() != eps.len() {
            return param("order grid and epsilon values differ in length");
        }
        if orders.iter().any(|&a| !(a.is_finite() && a > 1.0)) {
            return param("Rényi orders must be finite and greater than 1");
        }
        if orders.windows(2).any(|w| w[0] >= w[1]) {
            return param("Rényi orders must be strictly ascending");
        }
        if eps.iter().any(|&e| e.is_nan() || e < 0.0) {
            return param("RDP epsilons must be non-negative");
        }
        Ok(Self { orders, eps })
    }

    pub fn zero(orders: Vec<f64>) -> Self {
        let eps = vec![0.0; orders.len()];
        Self { orders, eps }
    }

    pub(crate) fn from_fn(orders: Vec<f64>, f: impl Fn(f64) -> f64) -> Self {
        let eps = orders.iter().map(|&a| f(a)).collect();
        Self { orders, eps }
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.orders.iter().copied().zip(self.eps.iter().copied())
    }

    /// Multiplies every ε(α) by `factor` (T-fold self-composition).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            orders: self.orders.clone(),
            eps: self.eps.iter().map(|e| e * factor).collect(),
        }
    }
}

/// One Poisson-subsampled Gaussian release repeated `steps` times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsampledGaussianEvent {
    sampling_rate: f64,
    noise_multiplier: f64,
    steps: u64,
}

impl SubsampledGaussianEvent {
    pub fn new(sampling_rate: f64, noise_multiplier: f64, steps: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&sampling_rate) {
            return param(format!("sampling rate must lie in [0, 1], got {sampling_rate}"));
        }
        if !(noise_multiplier.is_finite() && noise_multiplier > 0.0) {
            return param(format!("noise multiplier must be positive, got {noise_multiplier}"));
        }
        if steps == 0 {
            return param("event must cover at least one step");
        }
        Ok(Self {
            sampling_rate,
            noise_multiplier,
            steps,
        })
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn noise_multiplier(&self) -> f64 {
        self.noise_multiplier
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// RDP of the Gaussian mechanism with unit sensitivity: `α / (2σ²)`.
pub fn rdp_gaussian(noise_multiplier: f64, order: f64) -> Result<f64> {
    if !(noise_multiplier.is_finite() && noise_multiplier > 0.0) {
        return param(format!("noise multiplier must be positive, got {noise_multiplier}"));
    }
    if !(order > 1.0) {
        return param(format!("Rényi order must exceed 1, got {order}"));
    }
    Ok(order / (2.0 * noise_multiplier * noise_multiplier))
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Per-step RDP of one Poisson-subsampled Gaussian release at an integer
/// order, from the binomial expansion
/// `A_α = Σ_k C(α,k) (1-q)^(α-k) q^k exp((k²-k)/(2σ²))`, `ε = ln A_α / (α-1)`.
///
/// The sum is evaluated in log space so that small σ and large α do not
/// overflow.
pub fn rdp_subsampled_gaussian(event: &SubsampledGaussianEvent, order: f64) -> Result<f64> {
    if !(order >= 2.0 && order.fract() == 0.0 && order.is_finite()) {
        return param(format!(
            "subsampled Gaussian RDP is defined here for integer orders >= 2, got {order}"
        ));
    }
    let q = event.sampling_rate;
    let sigma = event.noise_multiplier;
    if q == 0.0 {
        return Ok(0.0);
    }
    if q == 1.0 {
        return rdp_gaussian(sigma, order);
    }
    let alpha = order as u64;
    let ln_q = q.ln();
    let ln_1mq = (-q).ln_1p();
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    let mut ln_binom = 0.0_f64;
    let mut ln_a = f64::NEG_INFINITY;
    for k in 0..=alpha {
        if k > 0 {
            ln_binom += ((alpha - k + 1) as f64).ln() - (k as f64).ln();
        }
        let kf = k as f64;
        let term = ln_binom + (alpha - k) as f64 * ln_1mq + kf * ln_q + (kf * kf - kf) * inv_two_var;
        ln_a = log_add(ln_a, term);
    }
    Ok((ln_a / (order - 1.0)).max(0.0))
}

/// RDP curve of a single Gaussian release with the given noise multiplier.
pub fn gaussian_curve(noise_multiplier: f64, orders: Vec<f64>) -> Result<RdpCurve> {
    let eps = orders
        .iter()
        .map(|&a| rdp_gaussian(noise_multiplier, a))
        .collect::<Result<Vec<_>>>()?;
    RdpCurve::new(orders, eps)
}

/// Composed RDP curve of all `steps` releases in `event`.
pub fn subsampled_gaussian_curve(event: &SubsampledGaussianEvent, orders: Vec<f64>) -> Result<RdpCurve> {
    let eps = orders
        .iter()
        .map(|&a| rdp_subsampled_gaussian(event, a).map(|e| e * event.steps as f64))
        .collect::<Result<Vec<_>>>()?;
    RdpCurve::new(orders, eps)
}

/// Sequential composition: pointwise sum over a shared order grid. The
/// empty composition is the zero curve on the standard grid.
pub fn rdp_compose(curves: &[RdpCurve]) -> Result<RdpCurve> {
    let Some(first) = curves.first() else {
        return Ok(RdpCurve::zero(RdpCurve::standard_orders()));
    };
    let mut eps = first.eps.clone();
    for c in &curves[1..] {
        if c.orders != first.orders {
            return param("cannot compose RDP curves over different order grids");
        }
        for (acc, e) in eps.iter_mut().zip(&c.eps) {
            *acc += e;
        }
    }
    Ok(RdpCurve {
        orders: first.orders.clone(),
        eps,
    })
}

/// Result of converting an RDP curve to (ε, δ)-DP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conversion {
    pub epsilon: f64,
    /// Order at which the minimum was attained.
    pub order: f64,
}

/// `min_α ε(α) + ln(1/(αδ))/(α-1) + ln(1-1/α)`, clamped at zero.
pub fn rdp_to_approx_dp(curve: &RdpCurve, delta: f64) -> Result<Conversion> {
    if !(delta > 0.0 && delta < 1.0) {
        return param(format!("delta must lie in (0, 1), got {delta}"));
    }
    if curve.is_empty() {
        return param("cannot convert an RDP curve with an empty order grid");
    }
    let mut best = Conversion {
        epsilon: f64::INFINITY,
        order: curve.orders[0],
    };
    for (alpha, e) in curve.iter() {
        let eps = e + (1.0 / (alpha * delta)).ln() / (alpha - 1.0) + (-1.0 / alpha).ln_1p();
        if eps < best.epsilon {
            best = Conversion { epsilon: eps, order: alpha };
        }
    }
    best.epsilon = best.epsilon.max(0.0);
    Ok(best)
}

/// Smallest noise multiplier (to bisection precision on log σ) such that
/// `steps` Poisson-subsampled Gaussian releases at rate `sampling_rate`
/// stay within `target`.
pub fn calibrate_noise_multiplier(target: PrivacyBudget, steps: u64, sampling_rate: f64) -> Result<f64> {
    calibrate_noise_multiplier_with(target, steps, sampling_rate, None)
}

/// Like [`calibrate_noise_multiplier`], but composes the training releases
/// with an additional fixed curve (for example private selection rounds)
/// that shares the same budget.
pub fn calibrate_noise_multiplier_with(
    target: PrivacyBudget,
    steps: u64,
    sampling_rate: f64,
    extra: Option<&RdpCurve>,
) -> Result<f64> {
    if steps == 0 {
        return param("calibration needs at least one step");
    }
    if !(sampling_rate > 0.0 && sampling_rate <= 1.0) {
        return param(format!("sampling rate must lie in (0, 1], got {sampling_rate}"));
    }
    let orders = extra
        .map(|c| c.orders().to_vec())
        .unwrap_or_else(RdpCurve::standard_orders);
    calibrate_for_curve(target, |sigma| {
        let event = SubsampledGaussianEvent::new(sampling_rate, sigma, steps)?;
        let train = subsampled_gaussian_curve(&event, orders.clone())?;
        match extra {
            Some(c) => rdp_compose(&[train, c.clone()]),
            None => Ok(train),
        }
    })
    .map_err(|e| match e {
        Error::Calibration(msg) => {
            Error::Calibration(format!("{msg} ({steps} steps, sampling rate {sampling_rate})"))
        }
        other => other,
    })
}

/// Smallest noise multiplier in `[SIGMA_SEARCH_MIN, SIGMA_SEARCH_MAX]`
/// whose total RDP curve, as built by `curve_for`, converts to at most
/// `target`. `curve_for` must be non-increasing in σ. Bisects on ln σ and
/// returns the upper end of the final bracket, which always satisfies the
/// target.
pub fn calibrate_for_curve(
    target: PrivacyBudget,
    curve_for: impl Fn(f64) -> Result<RdpCurve>,
) -> Result<f64> {
    let spent = |sigma: f64| -> Result<f64> {
        Ok(rdp_to_approx_dp(&curve_for(sigma)?, target.delta())?.epsilon)
    };
    let mut lo = SIGMA_SEARCH_MIN.ln();
    let mut hi = SIGMA_SEARCH_MAX.ln();
    if spent(hi.exp())? > target.epsilon() {
        return Err(Error::Calibration(format!(
            "target epsilon {} unreachable with noise multiplier <= {SIGMA_SEARCH_MAX}",
            target.epsilon()
        )));
    }
    if spent(lo.exp())? <= target.epsilon() {
        return Ok(lo.exp());
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if spent(mid.exp())? <= target.epsilon() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}

/// RDP of the exponential mechanism via its `ε²/8`-zCDP guarantee,
/// `ε(α) = α ε²/8`, on the standard order grid.
pub fn em_selection_curve(eps_select: f64) -> Result<RdpCurve> {
    if !(eps_select.is_finite() && eps_select > 0.0) {
        return param(format!("selection epsilon must be positive, got {eps_select}"));
    }
    let rho = eps_select * eps_select / 8.0;
    Ok(RdpCurve::from_fn(RdpCurve::standard_orders(), |a| rho * a))
}

/// RDP of running a mechanism with curve `base` a TNB-distributed number of
/// times and releasing only the best run:
///
/// `ε̃(α₁) = ε(α₁) + min_α₂ [(1+η)(1-1/α₂)ε(α₂) + (1+η)ln(1/γ)/α₂] + ln E[h]/(α₁-1)`.
///
/// The `α₂` minimization ranges over the same grid as `α₁`. The output is
/// not monotonized in α; conversion takes the minimum over the grid anyway.
pub fn tuning_rdp_cost(base: &RdpCurve, params: &TnbParams) -> Result<RdpCurve> {
    if base.is_empty() {
        return param("tuning cost needs a non-empty order grid");
    }
    let scale = 1.0 + params.eta();
    let ln_inv_gamma = -params.gamma().ln();
    let inner = base
        .iter()
        .map(|(a2, e2)| scale * (1.0 - 1.0 / a2) * e2 + scale * ln_inv_gamma / a2)
        .fold(f64::INFINITY, f64::min);
    let ln_mean = params.mean().ln();
    let eps = base
        .iter()
        .map(|(a1, e1)| e1 + inner + ln_mean / (a1 - 1.0))
        .collect();
    Ok(RdpCurve {
        orders: base.orders.clone(),
        eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn event(q: f64, sigma: f64) -> SubsampledGaussianEvent {
        SubsampledGaussianEvent::new(q, sigma, 1).unwrap()
    }

    #[test]
    fn gaussian_rdp_values() {
        assert_eq!(rdp_gaussian(1.0, 2.0).unwrap(), 1.0);
        assert_eq!(rdp_gaussian(2.0, 2.0).unwrap(), 0.25);
        let r = rdp_gaussian(1.0, 3.0).unwrap() / rdp_gaussian(1.0, 2.0).unwrap();
        assert_eq!(r, 1.5);
        assert!(rdp_gaussian(1.0, 1.0).is_err());
        assert!(rdp_gaussian(1.0, 0.5).is_err());
        assert!(rdp_gaussian(0.0, 2.0).is_err());
    }

    #[test]
    fn subsampled_endpoints() {
        assert_eq!(rdp_subsampled_gaussian(&event(1.0, 1.0), 2.0).unwrap(), 1.0);
        assert_eq!(rdp_subsampled_gaussian(&event(0.0, 1.0), 2.0).unwrap(), 0.0);
        for a in RdpCurve::standard_orders() {
            assert_eq!(
                rdp_subsampled_gaussian(&event(1.0, 1.3), a).unwrap(),
                a / (2.0 * 1.3 * 1.3)
            );
        }
        assert!(rdp_subsampled_gaussian(&event(0.5, 1.0), 2.5).is_err());
        assert!(rdp_subsampled_gaussian(&event(0.5, 1.0), 1.0).is_err());
    }

    #[test]
    fn subsampled_matches_extended_precision_sum() {
        // Binomial series summed with 50-digit arithmetic (mpmath).
        let cases = [
            (0.1, 2.0, 8.0, 0.013_725_430_103_219_918),
            (0.01, 1.0, 32.0, 11.246_275_937_048_069),
            (0.5, 0.7, 5.0, 4.235_964_338_618_701_6),
        ];
        for (q, s, a, want) in cases {
            let got = rdp_subsampled_gaussian(&event(q, s), a).unwrap();
            assert!(((got - want) / want).abs() < 1e-10, "q={q} σ={s} α={a}: {got} vs {want}");
        }
    }

    #[test]
    fn event_validation() {
        assert!(SubsampledGaussianEvent::new(1.1, 1.0, 1).is_err());
        assert!(SubsampledGaussianEvent::new(0.5, 0.0, 1).is_err());
        assert!(SubsampledGaussianEvent::new(0.5, 1.0, 0).is_err());
    }

    #[test]
    fn composition() {
        let c = gaussian_curve(1.5, RdpCurve::standard_orders()).unwrap();
        assert_eq!(rdp_compose(std::slice::from_ref(&c)).unwrap(), c);
        let five = rdp_compose(&vec![c.clone(); 5]).unwrap();
        for ((_, e5), (_, e1)) in five.iter().zip(c.iter()) {
            assert!((e5 - 5.0 * e1).abs() <= 1e-12 * e5);
        }
        let empty = rdp_compose(&[]).unwrap();
        assert!(empty.eps().iter().all(|&e| e == 0.0));
        let other = gaussian_curve(1.0, vec![2.0, 3.0]).unwrap();
        assert!(rdp_compose(&[c, other]).is_err());
    }

    #[test]
    fn conversion_of_classical_calibration() {
        let sigma = 4.84480;
        let curve = gaussian_curve(sigma, RdpCurve::standard_orders()).unwrap();
        let conv = rdp_to_approx_dp(&curve, 1e-5).unwrap();
        assert!(conv.epsilon <= 1.0, "{conv:?}");

        // Dense-grid brute force over continuous orders as an oracle for the
        // integer-grid minimum: the grid cannot beat the dense minimum.
        let dense = (0..200_000)
            .map(|i| 1.0 + 1e-3 * (i + 1) as f64)
            .map(|a| a / (2.0 * sigma * sigma) + (1.0 / (a * 1e-5)).ln() / (a - 1.0) + (-1.0 / a).ln_1p())
            .fold(f64::INFINITY, f64::min);
        assert!(conv.epsilon >= dense - 1e-12);
        assert!(conv.epsilon - dense < 0.01, "{} vs {dense}", conv.epsilon);
    }

    #[test]
    fn conversion_of_zero_curve_attains_largest_order() {
        let orders = RdpCurve::standard_orders();
        let conv = rdp_to_approx_dp(&RdpCurve::zero(orders.clone()), 1e-5).unwrap();
        assert_eq!(conv.order, 512.0);
        let a: f64 = 512.0;
        let expect = (1.0 / (a * 1e-5)).ln() / (a - 1.0) + (-1.0 / a).ln_1p();
        assert_eq!(conv.epsilon, expect.max(0.0));
    }

    #[test]
    fn conversion_errors() {
        let c = RdpCurve::zero(vec![]);
        assert!(rdp_to_approx_dp(&c, 1e-5).is_err());
        let c = RdpCurve::zero(vec![2.0]);
        assert!(rdp_to_approx_dp(&c, 0.0).is_err());
        assert!(rdp_to_approx_dp(&c, 1.0).is_err());
    }

    #[test]
    fn curve_validation() {
        assert!(RdpCurve::new(vec![2.0, 3.0], vec![0.0]).is_err());
        assert!(RdpCurve::new(vec![1.0], vec![0.0]).is_err());
        assert!(RdpCurve::new(vec![3.0, 2.0], vec![0.0, 0.0]).is_err());
        assert!(RdpCurve::new(vec![2.0], vec![-1.0]).is_err());
    }

    fn spent(sigma: f64, target: PrivacyBudget, steps: u64, q: f64) -> f64 {
        let ev = SubsampledGaussianEvent::new(q, sigma, steps).unwrap();
        let c = subsampled_gaussian_curve(&ev, RdpCurve::standard_orders()).unwrap();
        rdp_to_approx_dp(&c, target.delta()).unwrap().epsilon
    }

    #[test]
    fn calibration_against_fine_bisection() {
        let target = PrivacyBudget::new(1.0, 1e-5).unwrap();
        let sigma = calibrate_noise_multiplier(target, 1, 1.0).unwrap();
        // Independent oracle: linear bisection on σ with many more steps.
        let (mut lo, mut hi) = (0.01_f64, 100.0_f64);
        for _ in 0..600 {
            let mid = 0.5 * (lo + hi);
            if spent(mid, target, 1, 1.0) <= 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!(((sigma - hi) / hi).abs() < 0.05, "{sigma} vs {hi}");
        let eps = spent(sigma, target, 1, 1.0);
        assert!(eps <= 1.0 && eps >= 0.99);
    }

    #[test]
    fn calibration_monotonicity() {
        let t = PrivacyBudget::new(1.0, 1e-5).unwrap();
        let s1 = calibrate_noise_multiplier(t, 50, 0.1).unwrap();
        let s4 = calibrate_noise_multiplier(t, 200, 0.1).unwrap();
        assert!(s4 > s1);
        let t2 = PrivacyBudget::new(2.0, 1e-5).unwrap();
        assert!(calibrate_noise_multiplier(t2, 50, 0.1).unwrap() < s1);
    }

    #[test]
    fn calibration_errors() {
        let t = PrivacyBudget::new(1.0, 1e-5).unwrap();
        assert!(calibrate_noise_multiplier(t, 0, 0.5).is_err());
        assert!(calibrate_noise_multiplier(t, 1, 0.0).is_err());
        let tiny = PrivacyBudget::new(1e-9, 1e-5).unwrap();
        assert!(matches!(
            calibrate_noise_multiplier(tiny, 1_000, 1.0),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn calibration_with_extra_curve_needs_more_noise() {
        let t = PrivacyBudget::new(2.0, 1e-5).unwrap();
        let base = calibrate_noise_multiplier(t, 100, 0.1).unwrap();
        let sel = em_selection_curve(0.06).unwrap().scaled(20.0);
        let more = calibrate_noise_multiplier_with(t, 100, 0.1, Some(&sel)).unwrap();
        assert!(more > base);
    }

    #[test]
    fn em_curve() {
        let c = em_selection_curve(2.0).unwrap();
        assert_eq!(c.orders()[0], 2.0);
        assert_eq!(c.eps()[0], 1.0);
        for (a, e) in c.iter() {
            assert!((e - 0.5 * a).abs() < 1e-12);
        }
        let tiny = em_selection_curve(1e-9).unwrap();
        assert!(tiny.eps().iter().all(|&e| e < 1e-15));
        assert!(em_selection_curve(0.0).is_err());
        assert!(em_selection_curve(-1.0).is_err());
    }

    #[test]
    fn tuning_cost_of_zero_curve() {
        let p = TnbParams::new(1.0, 0.1).unwrap();
        let base = RdpCurve::zero(RdpCurve::standard_orders());
        let out = tuning_rdp_cost(&base, &p).unwrap();
        let inner = base
            .orders()
            .iter()
            .map(|a2| 2.0 * (1.0_f64 / 0.1).ln() / a2)
            .fold(f64::INFINITY, f64::min);
        for (a1, e) in out.iter() {
            let want = inner + p.mean().ln() / (a1 - 1.0);
            assert!((e - want).abs() < 1e-12);
            assert!(e > 0.0);
        }
        assert!(tuning_rdp_cost(&RdpCurve::zero(vec![]), &p).is_err());
    }

    proptest! {
        #[test]
        fn subsampling_monotone_in_rate_and_noise(
            q1 in 0.0..1.0f64, dq in 0.0..0.5f64,
            s1 in 0.3..5.0f64, ds in 0.0..3.0f64,
            a in 2u32..64,
        ) {
            let q2 = (q1 + dq).min(1.0);
            let a = f64::from(a);
            let e1 = rdp_subsampled_gaussian(&event(q1, s1), a).unwrap();
            let e2 = rdp_subsampled_gaussian(&event(q2, s1), a).unwrap();
            prop_assert!(e2 >= e1 - 1e-12 * e1.abs());
            let e3 = rdp_subsampled_gaussian(&event(q1, s1 + ds), a).unwrap();
            prop_assert!(e3 <= e1 + 1e-12 * e1.abs());
        }

        #[test]
        fn subsampled_curve_non_decreasing_in_order(q in 0.001..1.0f64, s in 0.3..5.0f64) {
            let c = subsampled_gaussian_curve(&event(q, s), RdpCurve::standard_orders()).unwrap();
            for w in c.eps().windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12 * w[0].abs());
            }
        }

        #[test]
        fn conversion_non_increasing_in_delta(s in 0.5..10.0f64, d1 in 1e-10..1e-2f64, f in 1.0..50.0f64) {
            let c = gaussian_curve(s, RdpCurve::standard_orders()).unwrap();
            let d2 = (d1 * f).min(0.5);
            let e1 = rdp_to_approx_dp(&c, d1).unwrap().epsilon;
            let e2 = rdp_to_approx_dp(&c, d2).unwrap().epsilon;
            prop_assert!(e2 <= e1);
        }

        #[test]
        fn doubling_curve_never_decreases_epsilon(s in 0.5..10.0f64) {
            let c = gaussian_curve(s, RdpCurve::standard_orders()).unwrap();
            let e1 = rdp_to_approx_dp(&c, 1e-5).unwrap().epsilon;
            let e2 = rdp_to_approx_dp(&c.scaled(2.0), 1e-5).unwrap().epsilon;
            prop_assert!(e2 >= e1);
        }

        #[test]
        fn tuning_cost_dominates_base(s in 0.3..10.0f64, eta in -0.9..3.0f64, g in 0.001..0.999f64) {
            let base = gaussian_curve(s, RdpCurve::standard_orders()).unwrap();
            let p = TnbParams::new(eta, g).unwrap();
            let out = tuning_rdp_cost(&base, &p).unwrap();
            for (a, b) in out.eps().iter().zip(base.eps()) {
                prop_assert!(a >= b);
            }
        }
    }
}

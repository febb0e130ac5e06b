use std::io::Write;

use super::{simulate_grid, Lambda, MeanEstProblem, PerSilo, Spectrum};
use crate::error::{param, Error, Result};
use crate::fmt::sig9;
use crate::privacy::{
    calibrate_for_curve, gaussian_curve, tuning_rdp_cost, PrivacyBudget, RdpCurve, TnbParams,
};

/// How each point of the study is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StudyEvaluator {
    /// Exact expected error from the closed form.
    ClosedForm,
    /// Monte Carlo over the generative model, with common random numbers
    /// across the λ grid.
    MonteCarlo { trials: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub lambda: f64,
    pub mse_nonprivate: f64,
    pub mse_private: f64,
    /// One entry per TNB parameterization, in input order.
    pub mse_private_tuned: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningStudy {
    pub tnb: Vec<TnbParams>,
    /// Privacy noise of the untuned one-shot release.
    pub dp_noise: f64,
    /// Noise inflation factor required to pay for tuning, per TNB entry.
    pub inflation: Vec<f64>,
    pub rows: Vec<StudyRow>,
}

/// Error of MR-MTL over a λ grid without privacy, with privacy, and with
/// privacy once the cost of randomized tuning over λ is paid for.
///
/// The private curve uses the classical Gaussian calibration of `budget` at
/// the problem's clip bound. For each TNB parameterization, the RDP
/// accountant finds the noise multiplier a single release needs to stay
/// within `budget` with and without the tuning overhead; the ratio of the
/// two scales up the private noise for the tuned curve.
pub fn tuning_cost_study(
    problem: &MeanEstProblem,
    budget: PrivacyBudget,
    lambda_grid: &[f64],
    tnb: &[TnbParams],
    evaluator: StudyEvaluator,
) -> Result<TuningStudy> {
    if lambda_grid.is_empty() {
        return param("tuning study needs a non-empty lambda grid");
    }
    if let Some(l) = lambda_grid.iter().find(|&&l| !(l >= 0.0)) {
        return param(format!("lambda grid contains an invalid value {l}"));
    }
    if tnb.iter().any(|p| !p.mean().is_finite()) {
        return param("TNB expected run count must be finite");
    }

    let private = problem.clone().with_budget(budget)?;
    let dp_noise = private.dp_noise(0);
    let nonprivate = problem.clone().with_dp_noise(PerSilo::Uniform(0.0))?;

    let untuned = calibrate_for_curve(budget, |s| gaussian_curve(s, RdpCurve::standard_orders()))?;
    let inflation = tnb
        .iter()
        .map(|p| {
            let tuned = calibrate_for_curve(budget, |s| {
                tuning_rdp_cost(&gaussian_curve(s, RdpCurve::standard_orders())?, p)
            })?;
            Ok(tuned / untuned)
        })
        .collect::<Result<Vec<f64>>>()?;

    let tuned_problems = inflation
        .iter()
        .map(|r| private.clone().with_dp_noise(PerSilo::Uniform(dp_noise * r)))
        .collect::<Result<Vec<_>>>()?;

    let eval = |p: &MeanEstProblem| -> Result<Vec<f64>> {
        match evaluator {
            StudyEvaluator::ClosedForm => {
                let spec = Spectrum::of(p)?;
                Ok(lambda_grid.iter().map(|&l| spec.error_at(Lambda::Finite(l))).collect())
            }
            StudyEvaluator::MonteCarlo { trials, seed } => {
                let lambdas: Vec<Lambda> = lambda_grid.iter().map(|&l| Lambda::Finite(l)).collect();
                Ok(simulate_grid(p, &lambdas, trials, seed)?
                    .into_iter()
                    .map(|e| e.mean)
                    .collect())
            }
        }
    };

    let np = eval(&nonprivate)?;
    let pr = eval(&private)?;
    let tuned = tuned_problems.iter().map(eval).collect::<Result<Vec<_>>>()?;

    let rows = lambda_grid
        .iter()
        .enumerate()
        .map(|(i, &lambda)| StudyRow {
            lambda,
            mse_nonprivate: np[i],
            mse_private: pr[i],
            mse_private_tuned: tuned.iter().map(|col| col[i]).collect(),
        })
        .collect();

    Ok(TuningStudy {
        tnb: tnb.to_vec(),
        dp_noise,
        inflation,
        rows,
    })
}

/// Writes the study as CSV with header
/// `lambda,mse_nonprivate,mse_private,mse_private_tuned_eta<η>...`.
pub fn write_study_csv<W: Write>(study: &TuningStudy, out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io {
        path: "<tuning study>".into(),
        source: e.into(),
    };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header = vec![
        "lambda".to_string(),
        "mse_nonprivate".to_string(),
        "mse_private".to_string(),
    ];
    header.extend(study.tnb.iter().map(|p| format!("mse_private_tuned_eta{}", p.eta())));
    w.write_record(&header).map_err(io)?;
    for row in &study.rows {
        let mut rec = vec![sig9(row.lambda), sig9(row.mse_nonprivate), sig9(row.mse_private)];
        rec.extend(row.mse_private_tuned.iter().map(|&v| sig9(v)));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<tuning study>".into(),
        source: e,
    })
}

//! Executes experiments and writes their CSV outputs.
//!
//! Sweep points run on a worker pool; rows are written in config order
//! (methods, then ε, then λ, then seeds) whatever the completion order.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use silofed_core::data::{gen_clustered, gen_heterogeneous_linear, gen_mean_estimation, load_csv_silos, FederationData};
use silofed_core::federation::{run_with, MethodSpec, RunOptions};
use silofed_core::mean_est::{error_at_lambda, simulate_grid, tuning_cost_study, write_study_csv, Lambda, StudyEvaluator};
use silofed_core::privacy::{PrivacyBudget, TnbParams};
use silofed_core::PerSilo;

use crate::config::{
    trainer_config, DatasetSpec, Epsilon, Evaluator, Experiment, FederatedConfig, MeanEstConfig, TuningStudyConfig,
    LAMBDA_METHODS,
};
use crate::error::CliError;
use crate::results::{aggregate, write_agg, write_results, AggRow, ResultRow, Round, Seed};

#[derive(Debug, Clone, Default)]
pub struct RunSettings {
    pub out_dir: PathBuf,
    /// Worker threads; all cores when unset.
    pub workers: Option<usize>,
    /// Forces intermediate-round reporting on.
    pub report_intermediate: bool,
    /// Added to every configured seed.
    pub seed_offset: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepOutcome {
    pub files: Vec<PathBuf>,
    pub runs: usize,
    /// One note per failed run.
    pub failures: Vec<String>,
}

pub fn run_experiment(exp: &Experiment, settings: &RunSettings) -> Result<SweepOutcome, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {:?} workers: {e}", settings.workers)))?;
    std::fs::create_dir_all(&settings.out_dir).map_err(|e| CliError::io(&settings.out_dir, e))?;
    let out = settings.out_dir.join(exp.output());
    pool.install(|| match exp {
        Experiment::Federated(c) => federated(c, settings, &out),
        Experiment::MeanEstimation(c) => mean_estimation(c, settings, &out),
        Experiment::TuningStudy(c) => tuning_study(c, &out),
    })
}

fn shifted(seeds: &[u64], offset: u64) -> Result<Vec<u64>, CliError> {
    seeds
        .iter()
        .map(|s| {
            s.checked_add(offset)
                .ok_or_else(|| CliError::Config(format!("seed {s} plus offset {offset} overflows")))
        })
        .collect()
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Writes the main CSV (per-seed rows, each point followed by its `agg`
/// rows) and the companion `_agg.csv` with standard deviations.
fn write_points(
    out: &Path,
    points: Vec<Vec<ResultRow>>,
    runs: usize,
    mut failures: Vec<String>,
) -> Result<SweepOutcome, CliError> {
    let mut rows = Vec::new();
    let mut agg_rows: Vec<AggRow> = Vec::new();
    for mut point in points {
        for r in &mut point {
            if !r.within_budget() {
                failures.push(format!(
                    "{} seed {}: realized epsilon {} exceeds {}",
                    r.method, r.seed, r.realized_epsilon, r.epsilon
                ));
                r.round = Round::Error;
                r.train_metric = f64::NAN;
                r.test_metric = f64::NAN;
            }
        }
        let (main, agg) = aggregate(&point);
        rows.extend(point);
        rows.extend(main);
        agg_rows.extend(agg);
    }
    write_results(out, &rows)?;
    let agg_path = sibling(out, "_agg.csv");
    write_agg(&agg_path, &agg_rows)?;
    let mut files = vec![out.to_path_buf(), agg_path];
    if !failures.is_empty() {
        let err_path = sibling(out, "_errors.txt");
        let text: String = failures.iter().map(|f| format!("{f}\n")).collect();
        std::fs::write(&err_path, text).map_err(|e| CliError::io(&err_path, e))?;
        files.push(err_path);
    }
    Ok(SweepOutcome { files, runs, failures })
}

fn load_data(spec: &DatasetSpec, seed: u64) -> silofed_core::Result<FederationData> {
    match spec {
        DatasetSpec::HeterogeneousLinear {
            silos,
            n_per_silo,
            dim,
            heterogeneity,
            label_noise,
            task,
            seed: base,
        } => gen_heterogeneous_linear(*silos, *n_per_silo, *dim, *heterogeneity, *label_noise, *task, base.wrapping_add(seed)),
        DatasetSpec::Clustered {
            silos,
            n_per_silo,
            dim,
            seed: base,
            ..
        } => gen_clustered(*silos, *n_per_silo, *dim, spec.clusters().expect("clustered"), base.wrapping_add(seed)),
        DatasetSpec::MeanEstimation { problem, seed: base } => gen_mean_estimation(&problem.build()?, base.wrapping_add(seed)),
        DatasetSpec::Csv { dir, task } => load_csv_silos(dir, *task),
    }
}

struct Point {
    method: MethodSpec,
    lambda: Option<f64>,
    eps: Epsilon,
}

fn federated_points(c: &FederatedConfig) -> Vec<Point> {
    let mut points = Vec::new();
    for m in &c.sweep.methods {
        let lambdas: Vec<Option<f64>> = if LAMBDA_METHODS.contains(&m.name.as_str()) && m.lambda.is_none() {
            c.sweep.lambdas.iter().copied().map(Some).collect()
        } else {
            vec![m.lambda]
        };
        for &eps in &c.sweep.epsilons {
            for &lambda in &lambdas {
                let mut method = m.clone();
                method.lambda = lambda;
                points.push(Point { method, lambda, eps });
            }
        }
    }
    points
}

fn federated(c: &FederatedConfig, settings: &RunSettings, out: &Path) -> Result<SweepOutcome, CliError> {
    let seeds = shifted(&c.sweep.seeds, settings.seed_offset)?;
    let data: Vec<Result<FederationData, String>> = seeds
        .par_iter()
        .map(|&s| load_data(&c.dataset, s).map_err(|e| e.to_string()))
        .collect();
    let points = federated_points(c);
    let rounds = c.trainer.rounds;
    let opts = RunOptions {
        record_every: (c.report_intermediate || settings.report_intermediate).then(|| rounds.div_ceil(20)),
    };
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..seeds.len()).map(move |s| (p, s))).collect();
    let results: Vec<Result<Vec<ResultRow>, (ResultRow, String)>> = jobs
        .par_iter()
        .map(|&(p, s)| {
            let point = &points[p];
            let seed = seeds[s];
            let base = ResultRow {
                method: point.method.label(),
                lambda: point.lambda,
                epsilon: point.eps.0,
                delta: c.trainer.delta,
                seed: Seed::Run(seed),
                round: Round::Error,
                train_metric: f64::NAN,
                test_metric: f64::NAN,
                realized_epsilon: f64::NAN,
            };
            let fail = |msg: String| {
                let note = format!(
                    "{} lambda={} epsilon={} seed {seed}: {msg}",
                    base.method,
                    point.lambda.map_or("-".into(), |l| l.to_string()),
                    point.eps.0
                );
                (base.clone(), note)
            };
            let data = data[s].as_ref().map_err(|e| fail(e.clone()))?;
            let tc = trainer_config(c, point.method.clone(), point.eps);
            let report = run_with(&tc, data, seed, &opts).map_err(|e| fail(e.to_string()))?;
            let realized = report.realized_epsilon.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(report
                .rounds
                .iter()
                .map(|m| ResultRow {
                    round: if m.round == rounds { Round::Final } else { Round::At(m.round) },
                    train_metric: m.weighted_train_metric,
                    test_metric: m.weighted_test_metric,
                    realized_epsilon: realized,
                    ..base.clone()
                })
                .collect())
        })
        .collect();

    let mut failures = Vec::new();
    let mut grouped: Vec<Vec<ResultRow>> = (0..points.len()).map(|_| Vec::new()).collect();
    for (&(p, _), r) in jobs.iter().zip(results) {
        match r {
            Ok(rows) => grouped[p].extend(rows),
            Err((row, note)) => {
                grouped[p].push(row);
                failures.push(note);
            }
        }
    }
    write_points(out, grouped, jobs.len(), failures)
}

/// Rows report the closed-form expected error as `train_metric` and the
/// Monte Carlo estimate as `test_metric`.
fn mean_estimation(c: &MeanEstConfig, settings: &RunSettings, out: &Path) -> Result<SweepOutcome, CliError> {
    let seeds = shifted(&c.sweep.seeds, settings.seed_offset)?;
    let base = c.problem.build()?;
    let lambdas: Vec<Lambda> = c.sweep.lambdas.iter().map(|&l| Lambda::Finite(l)).collect();
    let eps = &c.sweep.epsilons;
    let jobs: Vec<(usize, usize)> = (0..eps.len()).flat_map(|e| (0..seeds.len()).map(move |s| (e, s))).collect();
    let results: Vec<silofed_core::Result<Vec<(f64, f64)>>> = jobs
        .par_iter()
        .map(|&(e, s)| {
            let problem = if eps[e].is_private() {
                base.clone().with_budget(PrivacyBudget::new(eps[e].0, c.delta)?)?
            } else {
                base.clone().with_dp_noise(PerSilo::Uniform(0.0))?
            };
            let mc = simulate_grid(&problem, &lambdas, c.trials, seeds[s])?;
            lambdas
                .iter()
                .zip(mc)
                .map(|(&l, m)| Ok((error_at_lambda(&problem, l)?, m.mean)))
                .collect()
        })
        .collect();

    let mut failures = Vec::new();
    let mut points: Vec<Vec<ResultRow>> = (0..eps.len() * lambdas.len()).map(|_| Vec::new()).collect();
    for (&(e, s), r) in jobs.iter().zip(results) {
        for (li, &lambda) in c.sweep.lambdas.iter().enumerate() {
            let row = ResultRow {
                method: "mrmtl".into(),
                lambda: Some(lambda),
                epsilon: eps[e].0,
                delta: c.delta,
                seed: Seed::Run(seeds[s]),
                round: Round::Final,
                train_metric: f64::NAN,
                test_metric: f64::NAN,
                realized_epsilon: eps[e].0,
            };
            let row = match &r {
                Ok(v) => ResultRow {
                    train_metric: v[li].0,
                    test_metric: v[li].1,
                    ..row
                },
                Err(err) => {
                    failures.push(format!("epsilon={} lambda={lambda} seed {}: {err}", eps[e].0, seeds[s]));
                    ResultRow {
                        round: Round::Error,
                        realized_epsilon: f64::NAN,
                        ..row
                    }
                }
            };
            points[e * lambdas.len() + li].push(row);
        }
    }
    write_points(out, points, jobs.len() * lambdas.len(), failures)
}

fn tuning_study(c: &TuningStudyConfig, out: &Path) -> Result<SweepOutcome, CliError> {
    let problem = c.problem.build()?;
    let budget = PrivacyBudget::new(c.epsilon, c.delta)?;
    let tnb = c
        .tnb
        .iter()
        .map(|t| TnbParams::with_mean(t.eta, t.mean))
        .collect::<silofed_core::Result<Vec<_>>>()?;
    let evaluator = match c.evaluator {
        Evaluator::ClosedForm => StudyEvaluator::ClosedForm,
        Evaluator::MonteCarlo { trials, seed } => StudyEvaluator::MonteCarlo { trials, seed },
    };
    let study = tuning_cost_study(&problem, budget, &c.lambdas, &tnb, evaluator)?;
    let f = std::fs::File::create(out).map_err(|e| CliError::io(out, e))?;
    write_study_csv(&study, std::io::BufWriter::new(f))?;
    Ok(SweepOutcome {
        files: vec![out.to_path_buf()],
        runs: 1,
        failures: Vec::new(),
    })
}

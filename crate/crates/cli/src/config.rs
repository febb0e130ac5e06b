//! Experiment configuration files.
//!
//! One JSON object per file with a `version` (currently 1) and a `kind`
//! selecting the experiment. Unknown keys are rejected everywhere.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use silofed_core::data::{ClusterSpec, Task};
use silofed_core::federation::{MethodSpec, TrainerConfig, TrainerRegistry};
use silofed_core::mean_est::MeanEstProblem;
use silofed_core::model::LossKind;
use silofed_core::privacy::TnbParams;

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// Methods whose spec takes a regularization strength. When their spec
/// leaves `lambda` unset, the sweep's λ axis fills it in.
pub const LAMBDA_METHODS: [&str; 3] = ["mrmtl", "ditto", "ifca_mrmtl"];

/// A privacy budget ε that may be `"inf"` (no privacy).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epsilon(pub f64);

impl Epsilon {
    pub fn is_private(self) -> bool {
        self.0.is_finite()
    }
}

impl Serialize for Epsilon {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Epsilon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = Epsilon;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Epsilon, E> {
                if v > 0.0 {
                    Ok(Epsilon(v))
                } else {
                    Err(E::custom(format!("epsilon must be positive, got {v}")))
                }
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Epsilon, E> {
                self.visit_f64(v as f64)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Epsilon, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Epsilon, E> {
                match v {
                    "inf" => Ok(Epsilon(f64::INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Federated,
    MeanEstimation,
    TuningStudy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Experiment {
    Federated(FederatedConfig),
    MeanEstimation(MeanEstConfig),
    TuningStudy(TuningStudyConfig),
}

impl Experiment {
    pub fn output(&self) -> &str {
        match self {
            Experiment::Federated(c) => &c.output,
            Experiment::MeanEstimation(c) => &c.output,
            Experiment::TuningStudy(c) => &c.output,
        }
    }
}

fn default_output() -> String {
    "results.csv".into()
}

fn default_tuning_output() -> String {
    "tuning.csv".into()
}

fn default_delta() -> f64 {
    1e-5
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederatedConfig {
    pub version: u32,
    pub kind: Kind,
    pub dataset: DatasetSpec,
    pub trainer: TrainerSettings,
    pub sweep: Sweep,
    #[serde(default = "default_output")]
    pub output: String,
    /// Also report every ⌈T/20⌉ rounds.
    #[serde(default)]
    pub report_intermediate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    HeterogeneousLinear {
        silos: usize,
        n_per_silo: usize,
        dim: usize,
        /// Variance τ² of silo weights around the shared center.
        heterogeneity: f64,
        #[serde(default)]
        label_noise: f64,
        #[serde(default = "binary")]
        task: Task,
        #[serde(default)]
        seed: u64,
    },
    Clustered {
        silos: usize,
        n_per_silo: usize,
        dim: usize,
        num_clusters: usize,
        #[serde(default)]
        mask_rate: f64,
        #[serde(default)]
        seed: u64,
    },
    MeanEstimation {
        problem: ProblemSpec,
        #[serde(default)]
        seed: u64,
    },
    /// `<id>_train.csv` / `<id>_test.csv` pairs; relative paths resolve
    /// against the config file's directory.
    Csv { dir: PathBuf, task: Task },
}

fn binary() -> Task {
    Task::Classification { num_classes: 2 }
}

impl DatasetSpec {
    pub fn clusters(&self) -> Option<ClusterSpec> {
        match *self {
            DatasetSpec::Clustered {
                num_clusters, mask_rate, ..
            } => Some(ClusterSpec {
                num_clusters,
                mask_rate,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerSettings {
    pub rounds: usize,
    #[serde(default = "one")]
    pub clip: f64,
    #[serde(default = "one")]
    pub sampling_rate: f64,
    #[serde(default = "lr")]
    pub learning_rate: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "yes")]
    pub weighted_aggregation: bool,
    #[serde(default)]
    pub loss: Option<LossKind>,
}

fn one() -> f64 {
    1.0
}

fn lr() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub methods: Vec<MethodSpec>,
    pub epsilons: Vec<Epsilon>,
    #[serde(default)]
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub silos: usize,
    pub n: usize,
    pub data_var: f64,
    pub heterogeneity: f64,
    #[serde(default)]
    pub meta_center: f64,
    #[serde(default)]
    pub clip: Option<f64>,
}

impl ProblemSpec {
    /// The problem without privacy noise.
    pub fn build(&self) -> silofed_core::Result<MeanEstProblem> {
        let p = MeanEstProblem::homogeneous(self.silos, self.n, self.data_var, self.heterogeneity, self.meta_center, 0.0)?;
        match self.clip {
            Some(c) => p.with_clip(c),
            None => Ok(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanEstConfig {
    pub version: u32,
    pub kind: Kind,
    pub problem: ProblemSpec,
    pub sweep: MeanSweep,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_output")]
    pub output: String,
}

fn default_trials() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanSweep {
    pub epsilons: Vec<Epsilon>,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningStudyConfig {
    pub version: u32,
    pub kind: Kind,
    pub problem: ProblemSpec,
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub lambdas: Vec<f64>,
    pub tnb: Vec<TnbSpec>,
    #[serde(default)]
    pub evaluator: Evaluator,
    #[serde(default = "default_tuning_output")]
    pub output: String,
}

/// Truncated negative binomial run count with shape η and expected value
/// `mean`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TnbSpec {
    pub eta: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Evaluator {
    #[default]
    ClosedForm,
    MonteCarlo { trials: usize, seed: u64 },
}

#[derive(Deserialize)]
struct Header {
    version: Option<u32>,
    kind: Option<Kind>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Reads and validates a config file. Relative dataset directories are
/// resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<Experiment, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut exp = parse_config_str(&text).map_err(|e| match e {
        CliError::Config(m) => config_err(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if let Experiment::Federated(FederatedConfig {
        dataset: DatasetSpec::Csv { dir, .. },
        ..
    }) = &mut exp
    {
        if dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            *dir = base.join(&*dir);
        }
    }
    Ok(exp)
}

fn typed<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        config_err(format!("at `{path}`: {inner}"))
    })?;
    de.end().map_err(|e| config_err(e.to_string()))?;
    Ok(value)
}

pub fn parse_config_str(text: &str) -> Result<Experiment, CliError> {
    let header: Header = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
    match header.version {
        Some(CONFIG_VERSION) => {}
        Some(v) => return Err(config_err(format!("unsupported config version {v}, expected {CONFIG_VERSION}"))),
        None => return Err(config_err("missing key `version`")),
    }
    let exp = match header.kind {
        Some(Kind::Federated) => Experiment::Federated(typed(text)?),
        Some(Kind::MeanEstimation) => Experiment::MeanEstimation(typed(text)?),
        Some(Kind::TuningStudy) => Experiment::TuningStudy(typed(text)?),
        None => return Err(config_err("missing key `kind`")),
    };
    validate(&exp)?;
    Ok(exp)
}

fn check_lambdas(lambdas: &[f64], key: &str) -> Result<(), CliError> {
    match lambdas.iter().position(|l| !(l.is_finite() && *l >= 0.0)) {
        Some(i) => Err(config_err(format!("{key}[{i}]: lambda must be finite and non-negative, got {}", lambdas[i]))),
        None => Ok(()),
    }
}

fn non_empty<T>(v: &[T], key: &str) -> Result<(), CliError> {
    if v.is_empty() {
        Err(config_err(format!("{key} must not be empty")))
    } else {
        Ok(())
    }
}

fn validate(exp: &Experiment) -> Result<(), CliError> {
    match exp {
        Experiment::Federated(c) => {
            let s = &c.sweep;
            non_empty(&s.methods, "sweep.methods")?;
            non_empty(&s.epsilons, "sweep.epsilons")?;
            non_empty(&s.seeds, "sweep.seeds")?;
            check_lambdas(&s.lambdas, "sweep.lambdas")?;
            let registry = TrainerRegistry::builtin();
            for (i, m) in s.methods.iter().enumerate() {
                let key = format!("sweep.methods[{i}]");
                if let Some(l) = m.lambda {
                    check_lambdas(&[l], &format!("{key}.lambda"))?;
                }
                let needs_axis = LAMBDA_METHODS.contains(&m.name.as_str()) && m.lambda.is_none();
                if needs_axis && s.lambdas.is_empty() {
                    return Err(config_err(format!("{key}: method `{}` needs a lambda or a non-empty sweep.lambdas", m.name)));
                }
                let mut probe = m.clone();
                if needs_axis {
                    probe.lambda = Some(s.lambdas[0]);
                }
                registry.build(&probe).map_err(|e| config_err(format!("{key}: {e}")))?;
                for &eps in &s.epsilons {
                    let tc = trainer_config(c, probe.clone(), eps);
                    tc.validate().map_err(|e| config_err(format!("trainer: {e}")))?;
                }
            }
            if let DatasetSpec::MeanEstimation { problem, .. } = &c.dataset {
                problem.build().map_err(|e| config_err(format!("dataset.problem: {e}")))?;
            }
        }
        Experiment::MeanEstimation(c) => {
            non_empty(&c.sweep.epsilons, "sweep.epsilons")?;
            non_empty(&c.sweep.lambdas, "sweep.lambdas")?;
            non_empty(&c.sweep.seeds, "sweep.seeds")?;
            check_lambdas(&c.sweep.lambdas, "sweep.lambdas")?;
            c.problem.build().map_err(|e| config_err(format!("problem: {e}")))?;
            if c.trials == 0 {
                return Err(config_err("trials must be positive"));
            }
            check_delta(c.delta)?;
        }
        Experiment::TuningStudy(c) => {
            non_empty(&c.lambdas, "lambdas")?;
            non_empty(&c.tnb, "tnb")?;
            check_lambdas(&c.lambdas, "lambdas")?;
            c.problem.build().map_err(|e| config_err(format!("problem: {e}")))?;
            if !(c.epsilon.is_finite() && c.epsilon > 0.0) {
                return Err(config_err(format!("epsilon must be finite and positive, got {}", c.epsilon)));
            }
            check_delta(c.delta)?;
            for (i, t) in c.tnb.iter().enumerate() {
                TnbParams::with_mean(t.eta, t.mean).map_err(|e| config_err(format!("tnb[{i}]: {e}")))?;
            }
        }
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<(), CliError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(config_err(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// The trainer config for one sweep point.
pub fn trainer_config(c: &FederatedConfig, method: MethodSpec, eps: Epsilon) -> TrainerConfig {
    use silofed_core::federation::PrivacySetting;
    let t = &c.trainer;
    let privacy = if eps.is_private() {
        PrivacySetting::uniform(eps.0, t.delta)
    } else {
        PrivacySetting::NonPrivate
    };
    TrainerConfig {
        clip: t.clip,
        sampling_rate: t.sampling_rate,
        learning_rate: t.learning_rate,
        weighted_aggregation: t.weighted_aggregation,
        loss: t.loss,
        ..TrainerConfig::new(method, t.rounds, privacy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "version": 1,
        "kind": "federated",
        "dataset": {"generator": "heterogeneous_linear", "silos": 4, "n_per_silo": 20, "dim": 3, "heterogeneity": 0.5},
        "trainer": {"rounds": 5},
        "sweep": {"methods": [{"name": "local"}], "epsilons": [1.0, "inf"], "seeds": [0]}
    }"#;

    fn federated(text: &str) -> FederatedConfig {
        match parse_config_str(text).unwrap() {
            Experiment::Federated(c) => c,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = federated(MINIMAL);
        assert_eq!(c.output, "results.csv");
        assert!(!c.report_intermediate);
        assert_eq!(c.trainer.clip, 1.0);
        assert_eq!(c.trainer.sampling_rate, 1.0);
        assert_eq!(c.trainer.learning_rate, 0.1);
        assert_eq!(c.trainer.delta, 1e-5);
        assert!(c.trainer.weighted_aggregation);
        assert_eq!(c.sweep.epsilons, vec![Epsilon(1.0), Epsilon(f64::INFINITY)]);
        match c.dataset {
            DatasetSpec::HeterogeneousLinear { label_noise, task, seed, .. } => {
                assert_eq!((label_noise, seed), (0.0, 0));
                assert_eq!(task, Task::Classification { num_classes: 2 });
            }
            other => panic!("{other:?}"),
        }
        // Defaults survive the echo.
        let echoed = serde_json::to_string(&Experiment::Federated(c.clone())).unwrap();
        assert_eq!(federated(&echoed), c);
    }

    fn err(text: &str) -> String {
        match parse_config_str(text) {
            Err(CliError::Config(m)) => m,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let m = err(&MINIMAL.replace("\"epsilons\"", "\"epsilonn\""));
        assert!(m.contains("epsilonn") && m.contains("sweep"), "{m}");
        let m = err(&MINIMAL.replace("\"rounds\": 5", "\"rounds\": 5, \"momentum\": 0.9"));
        assert!(m.contains("momentum") && m.contains("trainer"), "{m}");
    }

    #[test]
    fn negative_lambda_rejected() {
        let m = err(&MINIMAL.replace("\"seeds\"", "\"lambdas\": [0.1, -1], \"seeds\""));
        assert!(m.contains("lambdas[1]"), "{m}");
        let m = err(&MINIMAL.replace(r#"{"name": "local"}"#, r#"{"name": "mrmtl", "lambda": -0.5}"#));
        assert!(m.contains("lambda"), "{m}");
    }

    #[test]
    fn lambda_methods_need_an_axis() {
        let m = err(&MINIMAL.replace(r#"{"name": "local"}"#, r#"{"name": "ditto"}"#));
        assert!(m.contains("sweep.lambdas"), "{m}");
        federated(&MINIMAL.replace(r#"{"name": "local"}"#, r#"{"name": "ditto"}"#).replace("\"seeds\"", "\"lambdas\": [1], \"seeds\""));
    }

    #[test]
    fn structural_errors() {
        assert!(err(&MINIMAL.replace("\"version\": 1", "\"version\": 2")).contains("version"));
        assert!(err(&MINIMAL.replace("\"seeds\": [0]", "\"seeds\": []")).contains("sweep.seeds"));
        assert!(err(&MINIMAL.replace("heterogeneous_linear", "imagenet")).contains("imagenet"));
        assert!(err(&MINIMAL.replace("\"local\"", "\"mocha\"")).contains("mocha"));
        assert!(err(&MINIMAL.replace("\"inf\"", "\"infinity\"")).contains("infinity"));
        assert!(err(&MINIMAL.replace("[1.0, ", "[0, ")).contains("positive"));
        assert!(err(&MINIMAL.replace("\"kind\": \"federated\",", "")).contains("kind"));
        err("[1, 2]");
        assert!(err("{}").contains("version"));
    }

    #[test]
    fn other_kinds_parse() {
        let me = r#"{"version": 1, "kind": "mean_estimation",
            "problem": {"silos": 5, "n": 10, "data_var": 1, "heterogeneity": 0.2},
            "sweep": {"epsilons": ["inf"], "lambdas": [0, 1], "seeds": [1, 2]}}"#;
        match parse_config_str(me).unwrap() {
            Experiment::MeanEstimation(c) => assert_eq!((c.trials, c.delta), (10_000, 1e-5)),
            other => panic!("{other:?}"),
        }
        let ts = r#"{"version": 1, "kind": "tuning_study",
            "problem": {"silos": 5, "n": 10, "data_var": 1, "heterogeneity": 0.2},
            "epsilon": 1, "lambdas": [0, 1], "tnb": [{"eta": 1, "mean": 10}],
            "evaluator": {"monte_carlo": {"trials": 100, "seed": 3}}}"#;
        match parse_config_str(ts).unwrap() {
            Experiment::TuningStudy(c) => {
                assert_eq!(c.evaluator, Evaluator::MonteCarlo { trials: 100, seed: 3 });
                assert_eq!(c.output, "tuning.csv");
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_config_str(&ts.replace("\"mean\": 10", "\"mean\": 0.5")).is_err());
    }
}

//! Silo datasets: synthetic generators with controlled heterogeneity, a CSV
//! loader for user-supplied silos, and per-silo train/test splitting.

mod load;
mod synth;

pub use load::load_csv_silos;
pub use synth::{gen_clustered, gen_heterogeneous_linear, gen_mean_estimation, ClusterSpec};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification { num_classes: usize },
    Regression,
}

impl Task {
    pub fn is_classification(&self) -> bool {
        matches!(self, Task::Classification { .. })
    }
}

/// One silo's examples. Features are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SiloDataset {
    id: String,
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl SiloDataset {
    pub fn new(id: impl Into<String>, dim: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return param("feature dimension must be positive");
        }
        if features.len() != dim * labels.len() {
            return param(format!(
                "{} feature values do not fill {} rows of dimension {dim}",
                features.len(),
                labels.len()
            ));
        }
        if features.iter().chain(&labels).any(|v| !v.is_finite()) {
            return param("dataset contains NaN or infinite values");
        }
        Ok(Self {
            id: id.into(),
            dim,
            features,
            labels,
        })
    }

    pub fn from_rows(id: impl Into<String>, rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(1, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return param("rows have differing lengths");
        }
        Self::new(id, dim, rows.concat(), labels)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// The examples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            id: self.id.clone(),
            dim: self.dim,
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// A federation of `K` silos with aligned train and test sets.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationData {
    pub train: Vec<SiloDataset>,
    pub test: Vec<SiloDataset>,
    pub task: Task,
    /// Ground-truth cluster of each silo, when the generator knows it.
    pub true_clusters: Option<Vec<usize>>,
    /// Ground-truth parameters of each silo (flat, one vector per silo),
    /// when the generator knows them.
    pub true_weights: Option<Vec<Vec<f64>>>,
}

impl FederationData {
    pub fn new(train: Vec<SiloDataset>, test: Vec<SiloDataset>, task: Task) -> Result<Self> {
        if train.len() < 2 {
            return param(format!("a federation needs at least 2 silos, got {}", train.len()));
        }
        if train.len() != test.len() {
            return param("train and test silo counts differ");
        }
        let dim = train[0].dim();
        for (tr, te) in train.iter().zip(&test) {
            if tr.id() != te.id() {
                return param(format!("silo ids '{}' and '{}' are not aligned", tr.id(), te.id()));
            }
            if tr.is_empty() || te.is_empty() {
                return param(format!("silo '{}' has an empty train or test set", tr.id()));
            }
            if tr.dim() != dim || te.dim() != dim {
                return param(format!("silo '{}' has a different feature dimension", tr.id()));
            }
        }
        if let Task::Classification { num_classes } = task {
            if num_classes < 2 {
                return param("classification needs at least 2 classes");
            }
            let bad = |y: &f64| *y < 0.0 || y.fract() != 0.0 || *y as usize >= num_classes;
            if let Some(s) = train.iter().chain(&test).find(|s| s.labels().iter().any(bad)) {
                return param(format!("silo '{}' has labels outside [0, {num_classes})", s.id()));
            }
        }
        Ok(Self {
            train,
            test,
            task,
            true_clusters: None,
            true_weights: None,
        })
    }

    pub fn silos(&self) -> usize {
        self.train.len()
    }

    pub fn dim(&self) -> usize {
        self.train[0].dim()
    }

    pub fn train_sizes(&self) -> Vec<usize> {
        self.train.iter().map(SiloDataset::len).collect()
    }
}

/// Shuffles each silo and holds out `⌈n·test_fraction⌉` examples (at least
/// one example always stays in training).
pub fn train_test_split(
    silos: Vec<SiloDataset>,
    task: Task,
    test_fraction: f64,
    seed: u64,
) -> Result<FederationData> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return param(format!("test fraction must lie in (0, 1), got {test_fraction}"));
    }
    let mut train = Vec::with_capacity(silos.len());
    let mut test = Vec::with_capacity(silos.len());
    for (k, silo) in silos.iter().enumerate() {
        let n = silo.len();
        if n < 2 {
            return Err(Error::Split(format!(
                "silo '{}' has {n} example(s); splitting needs at least 2",
                silo.id()
            )));
        }
        let n_test = ((n as f64 * test_fraction).ceil() as usize).clamp(1, n - 1);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng::stream(seed, &[0x7370_6c69, k as u64]));
        test.push(silo.select(&idx[..n_test]));
        train.push(silo.select(&idx[n_test..]));
    }
    FederationData::new(train, test, task)
}

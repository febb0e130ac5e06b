use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FederationData, SiloDataset, Task};
use crate::error::{param, Result};
use crate::mean_est::MeanEstProblem;
use crate::rng::{self, StreamRng};

const TAG_META: u64 = 1;
const TAG_SILO: u64 = 2;
const TAG_MASK: u64 = 3;

/// Cluster structure for [`gen_clustered`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub num_clusters: usize,
    /// Fraction of coordinates masked out of each silo's labeling rule.
    pub mask_rate: f64,
}

fn test_size(n: usize) -> usize {
    n.div_ceil(3)
}

fn gaussian_vec(rng: &mut StreamRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Linear tasks whose per-silo true weights scatter around a shared
/// meta-weight: `w_k = θ + N(0, τ² I)` with `θ ~ N(0, I)`.
///
/// Features are standard normal. Regression labels are `w_k·x` plus
/// `N(0, noise²)`. Classification labels are the argmax class of the
/// linear scores (the sign for two classes), replaced by a uniformly drawn
/// different class with probability `noise`. Each silo gets `n_per_silo`
/// training examples and `⌈n_per_silo / 3⌉` test examples.
pub fn gen_heterogeneous_linear(
    silos: usize,
    n_per_silo: usize,
    dim: usize,
    tau2: f64,
    noise: f64,
    task: Task,
    seed: u64,
) -> Result<FederationData> {
    if silos < 2 || n_per_silo == 0 || dim == 0 {
        return param("need at least 2 silos, 1 example per silo and 1 feature");
    }
    if !(tau2.is_finite() && tau2 >= 0.0) {
        return param(format!("tau2 must be non-negative, got {tau2}"));
    }
    let outputs = match task {
        Task::Regression => {
            if !(noise.is_finite() && noise >= 0.0) {
                return param(format!("label noise must be non-negative, got {noise}"));
            }
            1
        }
        Task::Classification { num_classes } => {
            if num_classes < 2 {
                return param("classification needs at least 2 classes");
            }
            if !(0.0..=1.0).contains(&noise) {
                return param(format!("label flip probability must lie in [0, 1], got {noise}"));
            }
            if num_classes == 2 {
                1
            } else {
                num_classes
            }
        }
    };

    let theta = gaussian_vec(&mut rng::stream(seed, &[TAG_META]), dim * outputs);
    let tau = tau2.sqrt();
    let mut train = Vec::with_capacity(silos);
    let mut test = Vec::with_capacity(silos);
    let mut weights = Vec::with_capacity(silos);
    for k in 0..silos {
        let mut r = rng::stream(seed, &[TAG_SILO, k as u64]);
        let w: Vec<f64> = theta.iter().map(|t| t + tau * r.sample::<f64, _>(StandardNormal)).collect();
        let id = format!("silo{k}");
        train.push(linear_examples(&mut r, &id, n_per_silo, dim, &w, noise, task));
        test.push(linear_examples(&mut r, &id, test_size(n_per_silo), dim, &w, noise, task));
        weights.push(w);
    }
    let mut data = FederationData::new(train, test, task)?;
    data.true_weights = Some(weights);
    Ok(data)
}

fn linear_examples(
    r: &mut StreamRng,
    id: &str,
    n: usize,
    dim: usize,
    w: &[f64],
    noise: f64,
    task: Task,
) -> SiloDataset {
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = gaussian_vec(r, dim);
        let y = match task {
            Task::Regression => dot(w, &x) + noise * r.sample::<f64, _>(StandardNormal),
            Task::Classification { num_classes } => {
                let clean = if num_classes == 2 {
                    f64::from(u8::from(dot(w, &x) > 0.0))
                } else {
                    let mut best = 0;
                    let mut best_score = f64::NEG_INFINITY;
                    for j in 0..num_classes {
                        let s = dot(&w[j * dim..(j + 1) * dim], &x);
                        if s > best_score {
                            best = j;
                            best_score = s;
                        }
                    }
                    best as f64
                };
                if r.random::<f64>() < noise {
                    // Uniform over the other classes.
                    let shift = r.random_range(1..num_classes);
                    ((clean as usize + shift) % num_classes) as f64
                } else {
                    clean
                }
            }
        };
        features.extend_from_slice(&x);
        labels.push(y);
    }
    SiloDataset::new(id, dim, features, labels).expect("generated data is finite")
}

/// Binary classification silos in `G` clusters with intra-cluster masking.
///
/// Cluster weights are pairwise orthogonal (Gram-Schmidt from a random unit
/// base vector) and have norm `√d`. Silo `k` belongs to cluster
/// `k / (K/G)`. Each silo draws a fixed mask of exactly `round(p·d)`
/// coordinates; its labels are `sign` of the cluster weight applied to the
/// features with those coordinates zeroed, while the observed features stay
/// unmasked. Labels are noiseless.
pub fn gen_clustered(
    silos: usize,
    n_per_silo: usize,
    dim: usize,
    spec: ClusterSpec,
    seed: u64,
) -> Result<FederationData> {
    let g = spec.num_clusters;
    if silos < 2 || n_per_silo == 0 || dim == 0 {
        return param("need at least 2 silos, 1 example per silo and 1 feature");
    }
    if g == 0 || g > silos {
        return param(format!("number of clusters must lie in [1, {silos}], got {g}"));
    }
    if silos % g != 0 {
        return param(format!("{g} clusters do not evenly divide {silos} silos"));
    }
    if g > dim {
        return param(format!("{g} orthogonal cluster weights need at least {g} features"));
    }
    if !(0.0..=1.0).contains(&spec.mask_rate) {
        return param(format!("mask rate must lie in [0, 1], got {}", spec.mask_rate));
    }

    let centers = orthogonal_weights(&mut rng::stream(seed, &[TAG_META]), g, dim);
    let per_cluster = silos / g;
    let masked = (spec.mask_rate * dim as f64).round() as usize;
    let task = Task::Classification { num_classes: 2 };

    let mut train = Vec::with_capacity(silos);
    let mut test = Vec::with_capacity(silos);
    let mut weights = Vec::with_capacity(silos);
    let mut clusters = Vec::with_capacity(silos);
    for k in 0..silos {
        let c = k / per_cluster;
        let mut w = centers[c].clone();
        let mut mr = rng::stream(seed, &[TAG_MASK, k as u64]);
        for i in index::sample(&mut mr, dim, masked) {
            w[i] = 0.0;
        }
        let mut r = rng::stream(seed, &[TAG_SILO, k as u64]);
        let id = format!("silo{k}");
        train.push(linear_examples(&mut r, &id, n_per_silo, dim, &w, 0.0, task));
        test.push(linear_examples(&mut r, &id, test_size(n_per_silo), dim, &w, 0.0, task));
        weights.push(w);
        clusters.push(c);
    }
    let mut data = FederationData::new(train, test, task)?;
    data.true_weights = Some(weights);
    data.true_clusters = Some(clusters);
    Ok(data)
}

fn orthogonal_weights(r: &mut StreamRng, g: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(g);
    while basis.len() < g {
        let mut v = gaussian_vec(r, dim);
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let scale = (dim as f64).sqrt();
    basis
        .into_iter()
        .map(|b| b.into_iter().map(|x| x * scale).collect())
        .collect()
}

/// The mean-estimation world as datasets: one constant feature equal to 1,
/// labels `x_{k,i} = w_k + N(0, σ_k²)` with `w_k ~ N(θ, τ²)`. Silo `k` gets
/// `n_k` training and `⌈n_k / 3⌉` test samples.
pub fn gen_mean_estimation(problem: &MeanEstProblem, seed: u64) -> Result<FederationData> {
    let tau = problem.heterogeneity().sqrt();
    let mut train = Vec::with_capacity(problem.silos());
    let mut test = Vec::with_capacity(problem.silos());
    let mut weights = Vec::with_capacity(problem.silos());
    for k in 0..problem.silos() {
        let mut r = rng::stream(seed, &[TAG_SILO, k as u64]);
        let w = problem.meta_center() + tau * r.sample::<f64, _>(StandardNormal);
        let sd = problem.data_var(k).sqrt();
        let mut draw = |n: usize| {
            let labels: Vec<f64> = (0..n).map(|_| w + sd * r.sample::<f64, _>(StandardNormal)).collect();
            SiloDataset::new(format!("silo{k}"), 1, vec![1.0; n], labels)
        };
        let n = problem.sample_count(k);
        train.push(draw(n)?);
        test.push(draw(test_size(n))?);
        weights.push(vec![w]);
    }
    let mut data = FederationData::new(train, test, Task::Regression)?;
    data.true_weights = Some(weights);
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{evaluate, LinearModel, LossKind};
    use std::collections::HashSet;

    const BIN: Task = Task::Classification { num_classes: 2 };

    fn ols(data: &SiloDataset) -> Vec<f64> {
        crate::testutil::least_squares(&[data], false)
    }

    #[test]
    fn iid_when_tau_zero_and_deterministic() {
        let a = gen_heterogeneous_linear(3, 20, 4, 0.0, 0.1, Task::Regression, 5).unwrap();
        let w = a.true_weights.as_ref().unwrap();
        assert_eq!(w[0], w[1]);
        assert_eq!(w[1], w[2]);
        let b = gen_heterogeneous_linear(3, 20, 4, 0.0, 0.1, Task::Regression, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.test[0].len(), 7);
        assert!(gen_heterogeneous_linear(3, 20, 0, 0.0, 0.1, Task::Regression, 5).is_err());
    }

    #[test]
    fn least_squares_recovers_noiseless_weights() {
        let d = 5;
        let data = gen_heterogeneous_linear(4, 10 * d, d, 0.5, 0.0, Task::Regression, 2).unwrap();
        for (silo, w) in data.train.iter().zip(data.true_weights.as_ref().unwrap()) {
            for (a, b) in ols(silo).iter().zip(w) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn flip_rate_matches_noise() {
        let noise = 0.2;
        let data = gen_heterogeneous_linear(10, 1000, 3, 1.0, noise, BIN, 8).unwrap();
        let (mut flips, mut n) = (0usize, 0usize);
        for (silo, w) in data.train.iter().zip(data.true_weights.as_ref().unwrap()) {
            for i in 0..silo.len() {
                let clean = f64::from(u8::from(dot(w, silo.row(i)) > 0.0));
                flips += usize::from(clean != silo.label(i));
                n += 1;
            }
        }
        let rate = flips as f64 / n as f64;
        let se = (noise * (1.0 - noise) / n as f64).sqrt();
        assert!((rate - noise).abs() < 3.0 * se, "{rate}");
    }

    #[test]
    fn multiclass_labels_in_range() {
        let data = gen_heterogeneous_linear(2, 50, 3, 0.1, 0.1, Task::Classification { num_classes: 4 }, 1).unwrap();
        assert!(data.train[0].labels().iter().all(|&y| (0.0..4.0).contains(&y)));
        assert_eq!(data.true_weights.unwrap()[0].len(), 12);
    }

    #[test]
    fn clustered_single_cluster_is_iid() {
        let spec = ClusterSpec { num_clusters: 1, mask_rate: 0.0 };
        let data = gen_clustered(4, 10, 6, spec, 3).unwrap();
        let w = data.true_weights.unwrap();
        assert!(w.iter().all(|v| v == &w[0]));
        assert_eq!(data.true_clusters.unwrap(), vec![0; 4]);
    }

    #[test]
    fn cluster_weights_orthogonal_with_norm_sqrt_d() {
        let spec = ClusterSpec { num_clusters: 4, mask_rate: 0.0 };
        let data = gen_clustered(8, 5, 16, spec, 1).unwrap();
        let w = data.true_weights.unwrap();
        assert_eq!(data.true_clusters.unwrap(), vec![0, 0, 1, 1, 2, 2, 3, 3]);
        for a in (0..8).step_by(2) {
            assert!((dot(&w[a], &w[a]) - 16.0).abs() < 1e-9);
            for b in (0..8).step_by(2).filter(|&b| b != a) {
                assert!(dot(&w[a], &w[b]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn clustered_classifier_transfers_within_cluster_only() {
        let spec = ClusterSpec { num_clusters: 4, mask_rate: 0.0 };
        let data = gen_clustered(8, 200, 8, spec, 4).unwrap();
        let w = data.true_weights.as_ref().unwrap();
        // The silo's own Bayes classifier, as a model.
        let mut p = w[0].clone();
        p.push(0.0);
        let m = LinearModel::unflatten(8, 1, p).unwrap();
        let peer = evaluate(&m, LossKind::Hinge, &data.test[1]).unwrap().metric;
        let other = evaluate(&m, LossKind::Hinge, &data.test[2]).unwrap().metric;
        assert_eq!(peer, 0.0);
        assert!(other > 0.3, "{other}");
    }

    #[test]
    fn masks_differ_within_cluster() {
        let spec = ClusterSpec { num_clusters: 2, mask_rate: 0.5 };
        let data = gen_clustered(4, 5, 32, spec, 6).unwrap();
        let w = data.true_weights.unwrap();
        let support = |v: &Vec<f64>| v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, _)| i).collect::<HashSet<_>>();
        assert_eq!(support(&w[0]).len(), 16);
        assert_ne!(support(&w[0]), support(&w[1]));
    }

    #[test]
    fn clustered_errors() {
        let spec = ClusterSpec { num_clusters: 5, mask_rate: 0.0 };
        assert!(gen_clustered(4, 5, 8, spec, 0).is_err());
        let spec = ClusterSpec { num_clusters: 2, mask_rate: 1.5 };
        assert!(gen_clustered(4, 5, 8, spec, 0).is_err());
    }

    #[test]
    fn mean_estimation_degenerate_and_variances() {
        let p = MeanEstProblem::homogeneous(3, 4, 0.0, 0.0, 2.5, 0.0).unwrap();
        let d = gen_mean_estimation(&p, 1).unwrap();
        assert!(d.train.iter().all(|s| s.labels().iter().all(|&y| y == 2.5)));

        let n = 10_000;
        let p = MeanEstProblem::homogeneous(2, n, 4.0, 1.0, 0.0, 0.0).unwrap();
        let d = gen_mean_estimation(&p, 2).unwrap();
        let y = d.train[0].labels();
        let mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        // Standard error of the sample variance of a Gaussian.
        let se = 4.0 * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - 4.0).abs() < 3.0 * se, "{var}");
    }

    #[test]
    fn silo_means_follow_total_variance() {
        let (k, n) = (2000, 10);
        let p = MeanEstProblem::homogeneous(k, n, 1.0, 0.5, 1.0, 0.0).unwrap();
        let d = gen_mean_estimation(&p, 3).unwrap();
        let means: Vec<f64> = d.train.iter().map(|s| s.labels().iter().sum::<f64>() / n as f64).collect();
        let var = means.iter().map(|m| (m - 1.0).powi(2)).sum::<f64>() / k as f64;
        let want = 0.5 + 1.0 / n as f64;
        let se = want * (2.0 / k as f64).sqrt();
        assert!((var - want).abs() < 3.0 * se, "{var} vs {want}");
    }
}

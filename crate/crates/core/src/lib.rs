//! Cross-silo federated learning under silo-specific sample-level
//! differential privacy.
//!
//! Each silo protects the individual examples of its own dataset with its
//! own (ε, δ) budget by running DP-SGD locally; the server only ever sees
//! already-privatized model updates. The crate provides the privacy
//! accountant, linear models and per-silo DP-SGD, a registry of federated
//! trainers (local, FedAvg, MR-MTL, Ditto, finetuning, IFCA and
//! IFCA-preconditioned MR-MTL), synthetic and CSV datasets, and the
//! closed-form theory of private federated mean estimation together with a
//! Monte Carlo simulator of the same model.

pub mod data;
pub mod dp_sgd;
pub mod error;
pub mod fmt;
pub mod federation;
pub mod mean_est;
pub mod model;
pub mod privacy;
pub mod rng;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use mean_est::PerSilo;

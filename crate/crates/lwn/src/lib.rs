//! Lightweight ternary-weight neural networks.
//!
//! Multilayer perceptrons whose trained weights all lie in {-1, 0, +1}
//! while thresholds stay free reals. A dual-objective training regimen
//! (error descent plus a discretization drift with black-hole snapping and
//! a round-and-rollback finalization) produces models that are mostly
//! zeros, run through a multiplication-free sparse engine, and store at
//! about `2 - p0` bits per weight under a fixed prefix code.
//!
//! The crate is organized around that lifecycle:
//!
//! - [`network`]: dense continuous-weight MLP, the training representation
//!   and reference forward pass;
//! - [`trainer`]: the discretizing training loop;
//! - [`ternary`]: frozen {-1, 0, +1} models with sign-split sparse
//!   connectivity and the multiplication-free `infer`;
//! - [`analysis`]: sparsity forensics (ignored inputs, dropped neurons,
//!   receptive fields, functioning-neuron counts);
//! - [`store`]: the prefix-coded wire format and storage accounting;
//! - [`datapipe`]: IDX/CSV ingestion, stratified splits, imbalance
//!   resamplers, synthetic generators;
//! - [`metrics`]: confusion matrices, F1, G-mean;
//! - [`approx`]: the constructive 1-D bump approximator;
//! - [`cli`]: the command-line front end.
//!
//! Start with the runnable examples in `examples/` — one per capability.

pub mod analysis;
pub mod approx;
pub mod cli;
pub mod datapipe;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod store;
pub mod ternary;
pub mod trainer;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use linalg::Mat;
pub use network::{init_network, Network, NetworkSpec};
pub use ternary::{freeze, TernaryModel};
pub use trainer::{train, TrainConfig, TrainStatus};

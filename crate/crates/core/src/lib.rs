//! Bayesian neural network regression.
//!
//! A single hidden layer network with a linear skip connection, horseshoe
//! shrinkage on the input weights, a multiplicative gamma process on the
//! output weights, per-neuron activation selection and stochastic volatility
//! errors, sampled by Gibbs sweeps with NUTS steps for the hidden weights.

pub mod activation;
pub mod error;
pub mod evaluation;
pub mod hmc;
pub mod model;
pub mod replication;
pub mod report;
pub mod sampler;
pub mod shrinkage;
pub mod simulation;
pub mod stats;
pub mod sv;

pub use error::{BnnError, Result};
pub use model::{ActivationKind, Dataset, NetworkState, SamplerConfig};

/// Library version.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

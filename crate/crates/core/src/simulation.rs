//! Synthetic data from a single-layer network where neuron q reads only
//! covariate q.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activation;
use crate::error::{BnnError, Result};
use crate::model::{ActivationKind, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DgpKind {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sparsity {
    /// 90% of neurons carry a nonzero loading.
    Dense,
    /// 10% of neurons carry a nonzero loading.
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    Homo,
    Hetero,
}

macro_rules! text_enum {
    ($ty:ty, $($variant:ident => $name:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = BnnError;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok(Self::$variant),)+
                    other => Err(BnnError::Config(format!(
                        "unknown {} '{other}'", stringify!($ty).to_lowercase()
                    ))),
                }
            }
        }
    };
}

text_enum!(DgpKind, Linear => "linear", Nonlinear => "nonlinear");
text_enum!(Sparsity, Dense => "dense", Sparse => "sparse");
text_enum!(Noise, Homo => "homo", Hetero => "hetero");

/// What a true neuron applies to its covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuronLink {
    /// The raw covariate (linear design).
    Identity,
    Activation(ActivationKind),
}

impl NeuronLink {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Self::Identity => z,
            Self::Activation(kind) => activation::act_eval(kind, z),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    /// Number of covariates, equal to the number of true neurons.
    pub k: usize,
    pub dgp_kind: DgpKind,
    pub sparsity: Sparsity,
    pub noise: Noise,
    pub t: usize,
    pub train_size: usize,
    /// Variance of the nonzero true loadings.
    pub c_sq: f64,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            k: 30,
            dgp_kind: DgpKind::Nonlinear,
            sparsity: Sparsity::Sparse,
            noise: Noise::Homo,
            t: 200,
            train_size: 100,
            c_sq: 0.5,
            seed: 1,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(BnnError::Config("k must be at least 1".into()));
        }
        if self.train_size < 2 || self.train_size >= self.t {
            return Err(BnnError::Config(format!(
                "train_size must lie in 2..t, got {} with t = {}",
                self.train_size, self.t
            )));
        }
        if !(self.c_sq > 0.0 && self.c_sq.is_finite()) {
            return Err(BnnError::Config(format!("c_sq must be positive, got {}", self.c_sq)));
        }
        Ok(())
    }

    /// Number of neurons with a nonzero loading.
    pub fn n_active(&self) -> usize {
        let share = match self.sparsity {
            Sparsity::Dense => 0.9,
            Sparsity::Sparse => 0.1,
        };
        ((self.k as f64 * share).round() as usize).min(self.k)
    }
}

/// The parameters data were generated from. Neuron biases are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpTruth {
    pub beta_true: Vec<f64>,
    pub kappa_true: DMatrix<f64>,
    pub activation_true: Vec<NeuronLink>,
    /// Error variance of every generated row.
    pub sigma_sq_true: Vec<f64>,
    pub active_mask: Vec<bool>,
}

impl DgpTruth {
    pub fn active_neurons(&self) -> Vec<usize> {
        (0..self.active_mask.len()).filter(|&q| self.active_mask[q]).collect()
    }

    /// Noise-free conditional mean at covariate row `x`.
    pub fn mean(&self, x: &[f64]) -> f64 {
        // κ is the identity, so neuron q sees covariate q
        x.iter()
            .zip(&self.beta_true)
            .zip(&self.activation_true)
            .map(|((xq, b), link)| if *b == 0.0 { 0.0 } else { b * link.apply(*xq) })
            .sum()
    }
}

/// Draws covariates, true parameters and responses.
pub fn generate<R: Rng + ?Sized>(config: &DgpConfig, rng: &mut R) -> Result<(Dataset, DgpTruth)> {
    config.validate()?;
    let k = config.k;
    let t = config.t;
    let x = DMatrix::from_fn(t, k, |_, _| rng.sample::<f64, _>(StandardNormal));

    let mut active_mask = vec![false; k];
    for q in sample(rng, k, config.n_active()) {
        active_mask[q] = true;
    }
    let loading = Normal::new(0.0, config.c_sq.sqrt()).expect("positive c_sq");
    let beta_true: Vec<f64> = active_mask
        .iter()
        .map(|&a| if a { loading.sample(rng) } else { 0.0 })
        .collect();
    let activation_true: Vec<NeuronLink> = (0..k)
        .map(|_| match config.dgp_kind {
            DgpKind::Linear => NeuronLink::Identity,
            DgpKind::Nonlinear => NeuronLink::Activation(ActivationKind::random(rng)),
        })
        .collect();
    let sigma_sq_true: Vec<f64> = match config.noise {
        Noise::Homo => vec![0.1; t],
        Noise::Hetero => (0..t)
            .map(|_| 0.1 * (0.1 * rng.sample::<f64, _>(StandardNormal)).exp())
            .collect(),
    };
    let truth = DgpTruth {
        beta_true,
        kappa_true: DMatrix::identity(k, k),
        activation_true,
        sigma_sq_true,
        active_mask,
    };
    let y = (0..t)
        .map(|i| {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            truth.mean(&row) + truth.sigma_sq_true[i].sqrt() * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Ok((Dataset::new(y, x)?, truth))
}

/// Random train / hold-out partition. Both parts keep their original row
/// positions in `row_ids`, in ascending order.
pub fn split<R: Rng + ?Sized>(
    dataset: &Dataset,
    truth: &DgpTruth,
    config: &DgpConfig,
    rng: &mut R,
) -> Result<(Dataset, Dataset)> {
    let t = dataset.len();
    if truth.sigma_sq_true.len() != t {
        return Err(BnnError::Dimension(format!(
            "truth covers {} rows, dataset has {t}",
            truth.sigma_sq_true.len()
        )));
    }
    if config.train_size == 0 || config.train_size >= t {
        return Err(BnnError::Config(format!(
            "train_size must lie in 1..{t}, got {}",
            config.train_size
        )));
    }
    let mut in_train = vec![false; t];
    for i in sample(rng, t, config.train_size) {
        in_train[i] = true;
    }
    let train: Vec<usize> = (0..t).filter(|&i| in_train[i]).collect();
    let hold: Vec<usize> = (0..t).filter(|&i| !in_train[i]).collect();
    Ok((dataset.select_rows(&train)?, dataset.select_rows(&hold)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_and_sparsity() {
        let cfg = DgpConfig::default();
        let (d, truth) = generate(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!((d.x.nrows(), d.x.ncols()), (200, 30));
        assert_eq!(truth.active_neurons().len(), 3);
        assert_eq!(truth.beta_true.iter().filter(|b| **b != 0.0).count(), 3);
        assert!(truth.sigma_sq_true.iter().all(|&s| s == 0.1));
        assert_eq!(truth.kappa_true, DMatrix::identity(30, 30));
        let dense = DgpConfig {
            sparsity: Sparsity::Dense,
            ..cfg
        };
        assert_eq!(dense.n_active(), 27);
    }

    #[test]
    fn same_seed_same_data() {
        let cfg = DgpConfig {
            noise: Noise::Hetero,
            ..Default::default()
        };
        let a = generate(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = generate(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_partitions_rows() {
        let cfg = DgpConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (d, truth) = generate(&cfg, &mut rng).unwrap();
        let (tr, ho) = split(&d, &truth, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!((tr.len(), ho.len()), (100, 100));
        let mut all: Vec<usize> = tr.row_ids.iter().chain(&ho.row_ids).copied().collect();
        all.sort();
        assert_eq!(all, (0..200).collect::<Vec<_>>());
        for (i, &r) in ho.row_ids.iter().enumerate() {
            assert_eq!(ho.y[i], d.y[r]);
        }
        let (tr2, _) = split(&d, &truth, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(tr.row_ids, tr2.row_ids);
        let single = DgpConfig {
            train_size: 199,
            ..cfg
        };
        let (_, ho) = split(&d, &truth, &single, &mut rng).unwrap();
        assert_eq!(ho.len(), 1);
    }

    #[test]
    fn linear_noise_is_calibrated() {
        let cfg = DgpConfig {
            dgp_kind: DgpKind::Linear,
            sparsity: Sparsity::Dense,
            ..Default::default()
        };
        let (d, truth) = generate(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let resid: Vec<f64> = (0..d.len())
            .map(|t| {
                let fit: f64 = d.row(t).iter().zip(&truth.beta_true).map(|(x, b)| x * b).sum();
                d.y[t] - fit
            })
            .collect();
        let v = crate::stats::variance(&resid);
        assert!((v - 0.1).abs() < 0.02, "{v}");
    }

    #[test]
    fn hetero_variances_stay_near_base_level() {
        let cfg = DgpConfig {
            noise: Noise::Hetero,
            ..Default::default()
        };
        let (_, truth) = generate(&cfg, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let logs: Vec<f64> = truth.sigma_sq_true.iter().map(|s| (s / 0.1).ln()).collect();
        let sd = crate::stats::variance(&logs).sqrt();
        assert!((sd - 0.1).abs() < 0.03, "{sd}");
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = DgpConfig {
            k: 0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(BnnError::Config(_))));
        let bad = DgpConfig {
            train_size: 200,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!("sparse".parse::<Sparsity>().is_ok());
        assert!("medium".parse::<Sparsity>().is_err());
    }
}

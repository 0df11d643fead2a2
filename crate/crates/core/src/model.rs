//! Domain types shared by the sampler, the simulator and the evaluation code.
//!
//! The regression is `y_t = x_t'γ + Σ_q β_q h_{δ_q}(x_t'κ_q + ζ_q) + ε_t` with
//! `ε_t ~ N(0, σ_t²)` and `log σ_t²` following a Gaussian AR(1).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::activation;
use crate::error::{BnnError, Result};

/// Responses and covariates for one estimation sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    /// `T × K` covariate matrix; row `t` is `x_t'`.
    pub x: DMatrix<f64>,
    /// Optional period labels, one per row.
    pub labels: Option<Vec<String>>,
    /// Row positions in the dataset this one was cut from.
    pub row_ids: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset, rejecting empty or non-finite input.
    ///
    /// Single-row datasets are accepted so hold-out sets can be represented;
    /// estimation additionally requires `T >= 2` (see [`Dataset::check_estimable`]).
    pub fn new(y: Vec<f64>, x: DMatrix<f64>) -> Result<Self> {
        let t = y.len();
        if t == 0 {
            return Err(BnnError::InvalidData("dataset has no rows".into()));
        }
        if x.nrows() != t {
            return Err(BnnError::Dimension(format!(
                "y has {} rows but X has {}",
                t,
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(BnnError::Dimension("X has no columns".into()));
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(BnnError::InvalidData(format!("non-finite response at row {pos}")));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(BnnError::InvalidData(format!(
                "non-finite covariate at row {}, column {}",
                pos % t,
                pos / t
            )));
        }
        Ok(Self {
            y,
            x,
            labels: None,
            row_ids: (0..t).collect(),
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(BnnError::Dimension(format!(
                "{} labels for {} rows",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Number of covariates `K`.
    pub fn n_covariates(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.x.row(t).iter().copied().collect()
    }

    pub fn label(&self, t: usize) -> String {
        match &self.labels {
            Some(l) => l[t].clone(),
            None => self.row_ids[t].to_string(),
        }
    }

    /// Sub-dataset made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(BnnError::Argument("empty row selection".into()));
        }
        let k = self.n_covariates();
        let x = DMatrix::from_fn(rows.len(), k, |i, j| self.x[(rows[i], j)]);
        let y = rows.iter().map(|&r| self.y[r]).collect();
        Ok(Self {
            y,
            x,
            labels: self
                .labels
                .as_ref()
                .map(|l| rows.iter().map(|&r| l[r].clone()).collect()),
            row_ids: rows.iter().map(|&r| self.row_ids[r]).collect(),
        })
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> Result<Self> {
        let rows: Vec<usize> = (0..n.min(self.len())).collect();
        self.select_rows(&rows)
    }

    pub fn check_estimable(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(BnnError::InvalidData(format!(
                "estimation needs at least 2 observations, got {}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// The four activation functions, numbered as in the usual table ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    LeakyRelu,
    Sigmoid,
    Relu,
    Tanh,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] = [
        ActivationKind::LeakyRelu,
        ActivationKind::Sigmoid,
        ActivationKind::Relu,
        ActivationKind::Tanh,
    ];

    /// Integer code, 1 to 4.
    pub fn code(self) -> u8 {
        match self {
            ActivationKind::LeakyRelu => 1,
            ActivationKind::Sigmoid => 2,
            ActivationKind::Relu => 3,
            ActivationKind::Tanh => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(ActivationKind::LeakyRelu),
            2 => Some(ActivationKind::Sigmoid),
            3 => Some(ActivationKind::Relu),
            4 => Some(ActivationKind::Tanh),
            _ => None,
        }
    }

    /// Zero-based position in [`ActivationKind::ALL`].
    pub fn index(self) -> usize {
        self.code() as usize - 1
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::LeakyRelu => "leakyrelu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Relu => "relu",
            ActivationKind::Tanh => "tanh",
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::ALL[rng.random_range(0..4)]
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = BnnError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if let Ok(code) = t.parse::<u8>() {
            return Self::from_code(code)
                .ok_or_else(|| BnnError::Argument(format!("activation code {code} not in 1..=4")));
        }
        Self::ALL
            .into_iter()
            .find(|k| k.name() == t)
            .ok_or_else(|| BnnError::Argument(format!("unknown activation '{s}'")))
    }
}

/// Horseshoe hierarchy for one coefficient block in its auxiliary
/// inverse-gamma form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeState {
    /// Global scale λ².
    pub global_scale_sq: f64,
    /// Local scales φ²_j.
    pub local_scales_sq: Vec<f64>,
    /// Auxiliary c_j for the local scales.
    pub aux_local: Vec<f64>,
    /// Auxiliary d for the global scale.
    pub aux_global: f64,
}

impl HorseshoeState {
    /// All scales and auxiliaries set to one.
    pub fn new(n: usize) -> Self {
        Self {
            global_scale_sq: 1.0,
            local_scales_sq: vec![1.0; n],
            aux_local: vec![1.0; n],
            aux_global: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.local_scales_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local_scales_sq.is_empty()
    }

    /// Prior variance λ²φ²_j of coefficient `j`.
    pub fn prior_variance(&self, j: usize) -> f64 {
        crate::stats::clamp_scale(self.global_scale_sq * self.local_scales_sq[j])
    }

    pub fn prior_precisions(&self) -> Vec<f64> {
        (0..self.len()).map(|j| 1.0 / self.prior_variance(j)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.aux_local.len() != self.local_scales_sq.len() {
            return Err(BnnError::Dimension(
                "horseshoe auxiliary and local scale lengths differ".into(),
            ));
        }
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.global_scale_sq) || !ok(self.aux_global) {
            return Err(BnnError::StateCorruption(format!(
                "horseshoe global terms not positive/finite: lambda^2={}, d={}",
                self.global_scale_sq, self.aux_global
            )));
        }
        if let Some(j) = self
            .local_scales_sq
            .iter()
            .zip(&self.aux_local)
            .position(|(&a, &b)| !ok(a) || !ok(b))
        {
            return Err(BnnError::StateCorruption(format!(
                "horseshoe local term {j} not positive/finite"
            )));
        }
        Ok(())
    }
}

/// Multiplicative gamma process on the neuron loadings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgpState {
    /// Gamma components ϱ_r; precision of β_q is their cumulative product.
    pub components: Vec<f64>,
    pub a1: f64,
    pub a2: f64,
}

impl MgpState {
    pub fn new(q: usize, a1: f64, a2: f64) -> Self {
        Self {
            components: vec![1.0; q],
            a1,
            a2,
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// φ_{β_q} = ∏_{r ≤ q} ϱ_r, recomputed on every call.
    pub fn precisions(&self) -> Vec<f64> {
        self.components
            .iter()
            .scan(1.0, |acc, &c| {
                *acc *= c;
                Some(*acc)
            })
            .collect()
    }

    /// Prior variances φ_{β_q}^{-1}.
    pub fn variances(&self) -> Vec<f64> {
        self.precisions().into_iter().map(|p| 1.0 / p).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a1 > 0.0 && self.a2 > 0.0) {
            return Err(BnnError::Config(format!(
                "MGP shapes must be positive (a1={}, a2={})",
                self.a1, self.a2
            )));
        }
        if let Some(r) = self.components.iter().position(|&c| !(c.is_finite() && c > 0.0)) {
            return Err(BnnError::StateCorruption(format!("MGP component {r} not positive/finite")));
        }
        if self.precisions().iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(BnnError::StateCorruption("MGP precision overflow/underflow".into()));
        }
        Ok(())
    }
}

/// Log-volatility path and AR(1) parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvState {
    /// ν_t = log σ_t².
    pub log_vol: Vec<f64>,
    /// Long-run level μ_ν.
    pub mu: f64,
    /// Persistence ρ_ν.
    pub rho: f64,
    /// State innovation variance ξ_ν².
    pub state_var: f64,
    /// Constant-variance mode: every ν_t equals `mu` and forecasts are `exp(mu)`.
    pub homoskedastic: bool,
}

impl SvState {
    pub fn new(t: usize, initial_log_var: f64, rho: f64, state_var: f64) -> Self {
        Self {
            log_vol: vec![initial_log_var; t],
            mu: initial_log_var,
            rho,
            state_var,
            homoskedastic: false,
        }
    }

    pub fn constant(t: usize, variance: f64) -> Self {
        let lv = variance.ln();
        Self {
            log_vol: vec![lv; t],
            mu: lv,
            rho: 0.0,
            state_var: 1.0,
            homoskedastic: true,
        }
    }

    pub fn variances(&self) -> Vec<f64> {
        self.log_vol.iter().map(|v| v.exp()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < 1.0) {
            return Err(BnnError::StateCorruption(format!("|rho| = {} >= 1", self.rho.abs())));
        }
        if !(self.state_var > 0.0 && self.state_var.is_finite()) {
            return Err(BnnError::StateCorruption(format!(
                "state variance {} not positive",
                self.state_var
            )));
        }
        if !self.mu.is_finite() {
            return Err(BnnError::StateCorruption("mu not finite".into()));
        }
        if let Some(t) = self.log_vol.iter().position(|v| {
            let s = v.exp();
            !(v.is_finite() && s.is_finite() && s > 0.0)
        }) {
            return Err(BnnError::StateCorruption(format!("variance at t={t} not finite")));
        }
        Ok(())
    }
}

/// Every sampled unknown of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    /// Linear coefficients γ (length K).
    pub gamma: Vec<f64>,
    /// Neuron loadings β (length Q).
    pub beta: Vec<f64>,
    /// `K × Q` weighting matrix; column q is κ_q.
    pub kappa: DMatrix<f64>,
    /// Biases ζ (length Q).
    pub zeta: Vec<f64>,
    /// Activation indicator per neuron.
    pub delta: Vec<ActivationKind>,
    pub hs_gamma: HorseshoeState,
    pub hs_kappa: Vec<HorseshoeState>,
    pub mgp: MgpState,
    pub sv: SvState,
}

impl NetworkState {
    pub fn n_covariates(&self) -> usize {
        self.gamma.len()
    }

    pub fn n_neurons(&self) -> usize {
        self.beta.len()
    }

    /// Neuron index `z_q = x'κ_q + ζ_q`.
    pub fn neuron_input(&self, x: &[f64], q: usize) -> f64 {
        let col = self.kappa.column(q);
        x.iter().zip(col.iter()).map(|(a, b)| a * b).sum::<f64>() + self.zeta[q]
    }

    /// `T × Q` matrix of neuron inputs `Xκ + 1ζ'`.
    pub fn neuron_inputs(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x * &self.kappa;
        for (q, mut col) in z.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.zeta[q]);
        }
        z
    }

    /// `T × Q` matrix of neuron outputs `h_{δ_q}(z_tq)`.
    pub fn neuron_outputs(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = self.neuron_inputs(x);
        for (q, mut col) in z.column_iter_mut().enumerate() {
            let kind = self.delta[q];
            col.apply(|v| *v = activation::act_eval(kind, *v));
        }
        z
    }

    /// Conditional mean for every row of `x`.
    pub fn fitted(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let g = DVector::from_column_slice(&self.gamma);
        let mut m = x * g;
        if self.n_neurons() > 0 {
            let h = self.neuron_outputs(x);
            m += h * DVector::from_column_slice(&self.beta);
        }
        m.as_slice().to_vec()
    }

    /// Checks every dimensional and positivity invariant.
    pub fn validate(&self) -> Result<()> {
        let k = self.n_covariates();
        let q = self.n_neurons();
        if k == 0 {
            return Err(BnnError::Dimension("no covariates".into()));
        }
        if self.kappa.nrows() != k || self.kappa.ncols() != q {
            return Err(BnnError::Dimension(format!(
                "kappa is {}x{}, expected {k}x{q}",
                self.kappa.nrows(),
                self.kappa.ncols()
            )));
        }
        if self.zeta.len() != q || self.delta.len() != q || self.hs_kappa.len() != q || self.mgp.len() != q {
            return Err(BnnError::Dimension("neuron-indexed blocks disagree on Q".into()));
        }
        if self.hs_gamma.len() != k || self.hs_kappa.iter().any(|h| h.len() != k) {
            return Err(BnnError::Dimension("horseshoe block size differs from K".into()));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.gamma) || !finite(&self.beta) || !finite(&self.zeta) || !finite(self.kappa.as_slice()) {
            return Err(BnnError::StateCorruption("non-finite coefficient".into()));
        }
        self.hs_gamma.validate()?;
        for h in &self.hs_kappa {
            h.validate()?;
        }
        self.mgp.validate()?;
        self.sv.validate()
    }
}

/// Sampler settings. Defaults follow the 20,000 / 10,000 draw design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Total sweeps, burn-in included.
    pub n_draws: usize,
    pub n_burn: usize,
    /// Keep every `thin`-th post burn-in sweep.
    pub thin: usize,
    /// Number of neurons Q; `None` means Q = K.
    pub neurons: Option<usize>,
    /// Prior-draw shortcut threshold on φ_{β_q}^{-1}: neurons whose MGP
    /// prior variance is at or below it skip NUTS.
    pub mgp_threshold: f64,
    /// τ_β used when counting effective neurons.
    pub neuron_threshold: f64,
    pub mgp_a1: f64,
    pub mgp_a2: f64,
    pub sv_enabled: bool,
    /// Holds ρ_ν at this value instead of sampling it.
    pub sv_rho_fixed: Option<f64>,
    /// Ancillarity-sufficiency interweaving in the SV block.
    pub sv_interweave: bool,
    /// Benchmark mode: linear regression with horseshoe prior only.
    pub linear_only: bool,
    /// One activation shared by all neurons.
    pub common_activation: bool,
    pub nuts_target_accept: f64,
    pub nuts_max_depth: usize,
    /// Initial NUTS step size; non-positive means pick heuristically.
    pub nuts_init_step: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_draws: 20_000,
            n_burn: 10_000,
            thin: 1,
            neurons: None,
            mgp_threshold: 1e-4,
            neuron_threshold: 1e-4,
            mgp_a1: 2.0,
            mgp_a2: 3.0,
            sv_enabled: true,
            sv_rho_fixed: None,
            sv_interweave: true,
            linear_only: false,
            common_activation: false,
            nuts_target_accept: 0.8,
            nuts_max_depth: 10,
            nuts_init_step: 0.0,
            seed: 42,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(BnnError::Config(m));
        if self.n_draws == 0 || self.n_burn == 0 {
            return err("n_draws and n_burn must be positive".into());
        }
        if self.n_burn >= self.n_draws {
            return err(format!("n_burn ({}) must be below n_draws ({})", self.n_burn, self.n_draws));
        }
        if self.thin == 0 {
            return err("thin must be at least 1".into());
        }
        if self.neurons == Some(0) {
            return err("number of neurons must be positive".into());
        }
        // zero forces NUTS for every neuron, +inf forces prior draws
        if !(self.mgp_threshold >= 0.0) {
            return err("mgp_threshold must be nonnegative".into());
        }
        if !(self.neuron_threshold > 0.0) {
            return err("neuron_threshold must be positive".into());
        }
        if !(self.mgp_a1 > 0.0 && self.mgp_a2 > 0.0) {
            return err("MGP shapes must be positive".into());
        }
        if !(self.nuts_target_accept > 0.0 && self.nuts_target_accept < 1.0) {
            return err("nuts_target_accept must lie in (0, 1)".into());
        }
        if self.nuts_max_depth == 0 || self.nuts_max_depth > 16 {
            return err("nuts_max_depth must lie in 1..=16".into());
        }
        if let Some(r) = self.sv_rho_fixed {
            if !(r.abs() < 1.0) {
                return err(format!("fixed rho {r} must satisfy |rho| < 1"));
            }
        }
        Ok(())
    }

    /// Number of retained sweeps after burn-in and thinning.
    pub fn n_retained(&self) -> usize {
        (self.n_draws - self.n_burn).div_ceil(self.thin)
    }

    /// Neuron count for a dataset with `k` covariates (zero in linear mode).
    pub fn neuron_count(&self, k: usize) -> usize {
        if self.linear_only {
            0
        } else {
            self.neurons.unwrap_or(k)
        }
    }

    /// Desk-scale settings used by tests and the default replication grid.
    pub fn desk() -> Self {
        Self {
            n_draws: 3000,
            n_burn: 1000,
            ..Self::default()
        }
    }
}

/// Per-neuron NUTS bookkeeping accumulated over a chain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NeuronAcceptance {
    pub hmc_calls: usize,
    pub prior_draws: usize,
    pub divergences: usize,
    pub mean_accept_stat: f64,
    pub mean_tree_depth: f64,
    pub step_size: f64,
}

/// Retained draws and per-sweep traces of one chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainOutput {
    pub draws: Vec<NetworkState>,
    /// Gaussian log likelihood plus coefficient log priors, per retained draw.
    pub log_posterior: Vec<f64>,
    /// Effective neuron count (MGP threshold rule), per retained draw.
    pub qstar: Vec<usize>,
    pub acceptance: Vec<NeuronAcceptance>,
    /// State after the final sweep, retained or not.
    pub final_state: NetworkState,
    pub thin: usize,
    pub n_sweeps: usize,
    pub n_burn: usize,
    pub elapsed_secs: f64,
}

impl ChainOutput {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// `S × Q` matrix of retained β draws.
    pub fn beta_draws(&self) -> DMatrix<f64> {
        let q = self.draws.first().map_or(0, |d| d.n_neurons());
        DMatrix::from_fn(self.draws.len(), q, |s, j| self.draws[s].beta[j])
    }

    /// Posterior mean of the conditional mean on `x`.
    pub fn posterior_mean_fit(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let mut acc = vec![0.0; x.nrows()];
        for d in &self.draws {
            for (a, f) in acc.iter_mut().zip(d.fitted(x)) {
                *a += f;
            }
        }
        let n = self.draws.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

/// Initial state for `k` covariates and `q` neurons.
///
/// γ, β and ζ start at zero, κ entries are drawn from N(0, 0.01), every
/// shrinkage scale is one and the log-volatility path starts flat at the log
/// sample variance of `y`.
pub fn new_network_state<R: Rng + ?Sized>(
    k: usize,
    q: usize,
    y: &[f64],
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<NetworkState> {
    if k == 0 {
        return Err(BnnError::Dimension("K must be at least 1".into()));
    }
    if q == 0 && !config.linear_only {
        return Err(BnnError::Dimension("Q must be at least 1".into()));
    }
    if y.is_empty() {
        return Err(BnnError::InvalidData("empty response".into()));
    }
    let kappa_prior = Normal::new(0.0, 0.1).expect("valid normal");
    let kappa = DMatrix::from_fn(k, q, |_, _| kappa_prior.sample(rng));
    let delta = if config.common_activation {
        vec![ActivationKind::random(rng); q]
    } else {
        (0..q).map(|_| ActivationKind::random(rng)).collect()
    };
    let var_y = crate::stats::variance(y).max(1e-8);
    let t = y.len();
    let sv = if config.sv_enabled {
        SvState::new(t, var_y.ln(), config.sv_rho_fixed.unwrap_or(0.9), 0.01)
    } else {
        SvState::constant(t, var_y)
    };
    let state = NetworkState {
        gamma: vec![0.0; k],
        beta: vec![0.0; q],
        kappa,
        zeta: vec![0.0; q],
        delta,
        hs_gamma: HorseshoeState::new(k),
        hs_kappa: vec![HorseshoeState::new(k); q],
        mgp: MgpState::new(q, config.mgp_a1, config.mgp_a2),
        sv,
    };
    state.validate()?;
    Ok(state)
}

/// `x'γ + Σ_q β_q h_{δ_q}(x'κ_q + ζ_q)` at a single covariate vector.
pub fn conditional_mean(state: &NetworkState, x: &[f64]) -> Result<f64> {
    if x.len() != state.n_covariates() {
        return Err(BnnError::Dimension(format!(
            "covariate vector has length {}, state expects {}",
            x.len(),
            state.n_covariates()
        )));
    }
    let linear: f64 = x.iter().zip(&state.gamma).map(|(a, b)| a * b).sum();
    let nonlinear: f64 = (0..state.n_neurons())
        .map(|q| state.beta[q] * activation::act_eval(state.delta[q], state.neuron_input(x, q)))
        .sum();
    Ok(linear + nonlinear)
}

//! The Gibbs sampler over all network unknowns, chain driver and
//! predictive simulation.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activation;
use crate::error::{BnnError, Result};
use crate::hmc::{self, AdaptState, NeuronTarget, NutsConfig, Rescaled};
use crate::model::{
    conditional_mean, new_network_state, ActivationKind, ChainOutput, Dataset, NetworkState, NeuronAcceptance,
    SamplerConfig,
};
use crate::shrinkage::{effective_neurons, horseshoe_update, mgp_update};
use crate::stats::{log_sum_exp, HALF_LN_2PI};
use crate::sv::{sv_forecast, sv_update, SvOptions};

const JITTER: f64 = 1e-10;

/// One draw from the predictive distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDraw {
    /// Conditional mean at the forecast point.
    pub mean: f64,
    /// Error variance drawn for the forecast period.
    pub variance: f64,
    /// `mean` plus a Gaussian innovation with `variance`.
    pub draw: f64,
}

/// `T × (K + Q)` regressor matrix `[X, h_1(·), …, h_Q(·)]` of the joint
/// (γ, β) regression.
pub fn design_matrix(state: &NetworkState, x: &DMatrix<f64>) -> DMatrix<f64> {
    let k = x.ncols();
    let q = state.n_neurons();
    let mut d = DMatrix::zeros(x.nrows(), k + q);
    d.columns_mut(0, k).copy_from(x);
    if q > 0 {
        d.columns_mut(k, q).copy_from(&state.neuron_outputs(x));
    }
    d
}

/// Prior precisions of θ = (γ', β')'.
pub fn theta_prior_precisions(state: &NetworkState) -> Vec<f64> {
    let mut p = state.hs_gamma.prior_precisions();
    p.extend(state.mgp.precisions());
    p
}

/// Posterior precision `x̃'Σ⁻¹x̃ + V̲⁻¹` and the vector `x̃'Σ⁻¹y`.
pub fn theta_posterior_terms(state: &NetworkState, data: &Dataset) -> (DMatrix<f64>, DVector<f64>) {
    let d = design_matrix(state, &data.x);
    let inv_var: Vec<f64> = state.sv.log_vol.iter().map(|v| (-v).exp()).collect();
    let mut weighted = d.clone();
    for (mut row, w) in weighted.row_iter_mut().zip(&inv_var) {
        row *= *w;
    }
    let mut precision = d.transpose() * &weighted;
    for (i, p) in theta_prior_precisions(state).into_iter().enumerate() {
        precision[(i, i)] += p;
    }
    let y = DVector::from_column_slice(&data.y);
    let rhs = weighted.transpose() * y;
    (precision, rhs)
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let ev = m.clone().symmetric_eigenvalues();
    let max = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = ev.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn factorize(precision: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    if precision.iter().any(|v| !v.is_finite()) {
        return Err(BnnError::NumericalSingularity {
            condition: f64::INFINITY,
        });
    }
    if let Some(c) = Cholesky::new(precision.clone()) {
        return Ok(c);
    }
    let n = precision.nrows();
    let jittered = &precision + DMatrix::identity(n, n) * JITTER;
    Cholesky::new(jittered).ok_or_else(|| BnnError::NumericalSingularity {
        condition: condition_estimate(&precision),
    })
}

/// Joint Gaussian draw of (γ, β) given everything else.
pub fn draw_theta<R: Rng + ?Sized>(state: &NetworkState, data: &Dataset, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = state.n_covariates();
    if data.n_covariates() != k || data.len() != state.sv.log_vol.len() {
        return Err(BnnError::Dimension(format!(
            "data is {}x{}, state expects T = {} and K = {k}",
            data.len(),
            data.n_covariates(),
            state.sv.log_vol.len()
        )));
    }
    let (precision, rhs) = theta_posterior_terms(state, data);
    let chol = factorize(precision)?;
    let mean = chol.solve(&rhs);
    // L'v = z gives v ~ N(0, (LL')⁻¹)
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let v = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or(BnnError::NumericalSingularity {
            condition: f64::INFINITY,
        })?;
    let theta = mean + v;
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(BnnError::NumericalSingularity {
            condition: f64::INFINITY,
        });
    }
    Ok((theta.rows(0, k).iter().copied().collect(), theta.rows(k, theta.len() - k).iter().copied().collect()))
}

/// Unnormalised log weights `log ¼ - ½ Σ_t (r_t - β h^{(m)}(z_t))² / σ_t²`
/// of the four activations, in [`ActivationKind::ALL`] order.
pub fn activation_log_weights(residual: &[f64], inputs: &[f64], beta: f64, inv_var: &[f64]) -> [f64; 4] {
    let mut w = [0.25f64.ln(); 4];
    for (m, kind) in ActivationKind::ALL.into_iter().enumerate() {
        let ss: f64 = residual
            .iter()
            .zip(inputs)
            .zip(inv_var)
            .map(|((r, z), iv)| {
                let e = r - beta * activation::act_eval(kind, *z);
                e * e * iv
            })
            .sum();
        w[m] -= 0.5 * ss;
    }
    w
}

/// Normalised probabilities from log weights.
pub fn normalize_log_weights(log_w: &[f64; 4]) -> [f64; 4] {
    let lse = log_sum_exp(log_w);
    let mut p = [0.0; 4];
    for (pi, lw) in p.iter_mut().zip(log_w) {
        *pi = (lw - lse).exp();
    }
    p
}

fn draw_categorical<R: Rng + ?Sized>(probs: &[f64; 4], rng: &mut R) -> ActivationKind {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (m, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return ActivationKind::ALL[m];
        }
    }
    ActivationKind::ALL[probs.iter().rposition(|p| *p > 0.0).unwrap_or(3)]
}

fn partial_residual(y: &[f64], linear: &[f64], outputs: &DMatrix<f64>, beta: &[f64], skip: usize) -> Vec<f64> {
    let mut r: Vec<f64> = y.iter().zip(linear).map(|(a, b)| a - b).collect();
    for (j, col) in outputs.column_iter().enumerate() {
        if j == skip || beta[j] == 0.0 {
            continue;
        }
        for (rt, h) in r.iter_mut().zip(col.iter()) {
            *rt -= beta[j] * h;
        }
    }
    r
}

fn column_inputs(state: &NetworkState, x: &DMatrix<f64>, q: usize) -> Vec<f64> {
    let kappa = state.kappa.column(q);
    (0..x.nrows())
        .map(|t| x.row(t).iter().zip(kappa.iter()).map(|(a, b)| a * b).sum::<f64>() + state.zeta[q])
        .collect()
}

fn inverse_variances(state: &NetworkState) -> Vec<f64> {
    state.sv.log_vol.iter().map(|v| (-v).exp()).collect()
}

/// Draw the activation of neuron `q` given the residual that excludes it.
pub fn draw_activation<R: Rng + ?Sized>(
    q: usize,
    residual_excl_q: &[f64],
    state: &NetworkState,
    data: &Dataset,
    rng: &mut R,
) -> Result<ActivationKind> {
    if q >= state.n_neurons() || residual_excl_q.len() != data.len() {
        return Err(BnnError::Dimension(format!(
            "neuron {q} of {}, residual length {} for T = {}",
            state.n_neurons(),
            residual_excl_q.len(),
            data.len()
        )));
    }
    let z = column_inputs(state, &data.x, q);
    let lw = activation_log_weights(residual_excl_q, &z, state.beta[q], &inverse_variances(state));
    Ok(draw_categorical(&normalize_log_weights(&lw), rng))
}

/// Log weights of a single activation shared by every neuron, from the
/// full Gaussian likelihood of `y` under each candidate.
pub fn common_activation_log_weights(state: &NetworkState, data: &Dataset) -> [f64; 4] {
    let linear = &data.x * DVector::from_column_slice(&state.gamma);
    let inputs = state.neuron_inputs(&data.x);
    let inv_var = inverse_variances(state);
    let mut w = [0.25f64.ln(); 4];
    for (m, kind) in ActivationKind::ALL.into_iter().enumerate() {
        let mut ss = 0.0;
        for t in 0..data.len() {
            let mut mean = linear[t];
            for q in 0..state.n_neurons() {
                mean += state.beta[q] * activation::act_eval(kind, inputs[(t, q)]);
            }
            let e = data.y[t] - mean;
            ss += e * e * inv_var[t];
        }
        w[m] -= 0.5 * ss;
    }
    w
}

/// Mutable per-chain sampler bookkeeping: step-size adaptation and
/// acceptance tallies for each neuron.
#[derive(Debug, Clone)]
pub struct KernelState {
    pub adapt: Vec<AdaptState>,
    pub acceptance: Vec<NeuronAcceptance>,
    pub nuts: NutsConfig,
    accept_sum: Vec<f64>,
    depth_sum: Vec<f64>,
}

impl KernelState {
    pub fn new(n_neurons: usize, config: &SamplerConfig) -> Self {
        Self {
            adapt: vec![AdaptState::new(); n_neurons],
            acceptance: vec![NeuronAcceptance::default(); n_neurons],
            nuts: NutsConfig {
                target_accept: config.nuts_target_accept,
                max_tree_depth: config.nuts_max_depth,
                // adaptation stops when the chain calls `freeze`
                adapt_steps: usize::MAX,
                init_step_size: config.nuts_init_step,
            },
            accept_sum: vec![0.0; n_neurons],
            depth_sum: vec![0.0; n_neurons],
        }
    }

    /// Stops step-size adaptation for every neuron.
    pub fn freeze(&mut self) {
        self.adapt.iter_mut().for_each(AdaptState::freeze);
    }

    /// Forgets acceptance tallies (adaptation state is kept).
    pub fn reset_tallies(&mut self) {
        let n = self.adapt.len();
        self.acceptance = vec![NeuronAcceptance::default(); n];
        self.accept_sum = vec![0.0; n];
        self.depth_sum = vec![0.0; n];
    }

    fn record(&mut self, q: usize, d: &hmc::NutsDiagnostics) {
        let a = &mut self.acceptance[q];
        a.hmc_calls += 1;
        a.divergences += d.divergent as usize;
        self.accept_sum[q] += d.accept_stat;
        self.depth_sum[q] += d.tree_depth as f64;
        a.mean_accept_stat = self.accept_sum[q] / a.hmc_calls as f64;
        a.mean_tree_depth = self.depth_sum[q] / a.hmc_calls as f64;
        a.step_size = d.step_size;
    }
}

/// `Σ_t x_tj² / σ_t²` for every column, followed by `Σ_t 1 / σ_t²`.
fn weighted_column_squares(x: &DMatrix<f64>, inv_var: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = x
        .column_iter()
        .map(|c| c.iter().zip(inv_var).map(|(v, w)| v * v * w).sum())
        .collect();
    out.push(inv_var.iter().sum());
    out
}

/// Coordinate scales for the NUTS update of `(κ_q, ζ_q)`.
///
/// Each scale is `1 / sqrt(prior precision + β² max(h'²) Σ_t x_tj² / σ_t²)`,
/// a bound on the conditional curvature that depends only on quantities
/// held fixed during the update, so the sampled conditional is unchanged.
/// Sampling `u` with `κ = scales ⊙ u` puts every direction on a comparable
/// scale for the identity-mass kernel.
pub fn neuron_scales(
    prior_precisions: &[f64],
    weighted_col_sq: &[f64],
    beta: f64,
    kind: ActivationKind,
) -> Vec<f64> {
    let lik = beta * beta * activation::max_grad_sq(kind);
    prior_precisions
        .iter()
        .chain(std::iter::once(&hmc::BIAS_PRIOR_PRECISION))
        .zip(weighted_col_sq)
        .map(|(p, c)| (p + lik * c).recip().sqrt())
        .collect()
}

fn draw_neuron_from_prior<R: Rng + ?Sized>(state: &mut NetworkState, q: usize, rng: &mut R) {
    for j in 0..state.n_covariates() {
        let sd = state.hs_kappa[q].prior_variance(j).sqrt();
        state.kappa[(j, q)] = sd * rng.sample::<f64, _>(StandardNormal);
    }
    state.zeta[q] = rng.sample(StandardNormal);
}

/// One full sweep of the Gibbs sampler.
///
/// Order: (γ, β) jointly; horseshoe on γ; MGP on β; each neuron's (κ_q, ζ_q)
/// by NUTS, or from its prior when its MGP variance is at or below
/// `mgp_threshold`; horseshoe on each κ_q; activations; volatility.
/// In linear mode only the first two blocks and the volatility run.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &NetworkState,
    data: &Dataset,
    config: &SamplerConfig,
    kernel: &mut KernelState,
    rng: &mut R,
) -> Result<NetworkState> {
    let mut s = state.clone();
    let (gamma, beta) = draw_theta(&s, data, rng)?;
    s.gamma = gamma;
    s.beta = beta;
    s.hs_gamma = horseshoe_update(&s.gamma, &s.hs_gamma, rng)?;

    let q_count = s.n_neurons();
    if !config.linear_only && q_count > 0 {
        if kernel.adapt.len() != q_count {
            return Err(BnnError::Dimension(format!(
                "kernel tracks {} neurons, state has {q_count}",
                kernel.adapt.len()
            )));
        }
        s.mgp = mgp_update(&s.beta, &s.mgp, rng)?;
        let linear: Vec<f64> = (&data.x * DVector::from_column_slice(&s.gamma)).iter().copied().collect();
        let inv_var = inverse_variances(&s);
        let mgp_var = s.mgp.variances();
        let mut outputs = s.neuron_outputs(&data.x);
        let k = s.n_covariates();
        let col_sq = weighted_column_squares(&data.x, &inv_var);
        for q in 0..q_count {
            if mgp_var[q] > config.mgp_threshold {
                let residual = partial_residual(&data.y, &linear, &outputs, &s.beta, q);
                let prec = s.hs_kappa[q].prior_precisions();
                let target = NeuronTarget::new(&data.x, &residual, &inv_var, &prec, s.beta[q], s.delta[q])?;
                let scales = neuron_scales(&prec, &col_sq, s.beta[q], s.delta[q]);
                let scaled = Rescaled::new(&target, scales)?;
                let mut current: Vec<f64> = s.kappa.column(q).iter().copied().collect();
                current.push(s.zeta[q]);
                let start = scaled.from_inner(&current);
                let (next, diag) = hmc::nuts_draw(&start, &scaled, &kernel.nuts, &mut kernel.adapt[q], rng);
                let next = scaled.to_inner(&next);
                kernel.record(q, &diag);
                for j in 0..k {
                    s.kappa[(j, q)] = next[j];
                }
                s.zeta[q] = next[k];
            } else {
                draw_neuron_from_prior(&mut s, q, rng);
                kernel.acceptance[q].prior_draws += 1;
            }
            let kind = s.delta[q];
            let z = column_inputs(&s, &data.x, q);
            for (t, zt) in z.into_iter().enumerate() {
                outputs[(t, q)] = activation::act_eval(kind, zt);
            }
        }
        for q in 0..q_count {
            let col: Vec<f64> = s.kappa.column(q).iter().copied().collect();
            s.hs_kappa[q] = horseshoe_update(&col, &s.hs_kappa[q], rng)?;
        }
        if config.common_activation {
            let lw = common_activation_log_weights(&s, data);
            let kind = draw_categorical(&normalize_log_weights(&lw), rng);
            s.delta.iter_mut().for_each(|d| *d = kind);
        } else {
            for q in 0..q_count {
                let residual = partial_residual(&data.y, &linear, &outputs, &s.beta, q);
                let z = column_inputs(&s, &data.x, q);
                let lw = activation_log_weights(&residual, &z, s.beta[q], &inv_var);
                let kind = draw_categorical(&normalize_log_weights(&lw), rng);
                if kind != s.delta[q] {
                    s.delta[q] = kind;
                    for (t, zt) in z.into_iter().enumerate() {
                        outputs[(t, q)] = activation::act_eval(kind, zt);
                    }
                }
            }
        }
    }

    let fitted = s.fitted(&data.x);
    let residuals: Vec<f64> = data.y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let options = SvOptions {
        rho_fixed: config.sv_rho_fixed,
        interweave: config.sv_interweave,
    };
    s.sv = sv_update(&residuals, &s.sv, &options, rng)?;
    Ok(s)
}

/// Gaussian log likelihood of `data` plus the log prior densities of γ, β,
/// κ and ζ given their current scales.
pub fn log_posterior(state: &NetworkState, data: &Dataset) -> f64 {
    let fitted = state.fitted(&data.x);
    let mut lp: f64 = data
        .y
        .iter()
        .zip(&fitted)
        .zip(&state.sv.log_vol)
        .map(|((y, f), lv)| {
            let e = y - f;
            -HALF_LN_2PI - 0.5 * lv - 0.5 * e * e * (-lv).exp()
        })
        .sum();
    let gauss = |v: f64, prec: f64| -HALF_LN_2PI + 0.5 * prec.ln() - 0.5 * prec * v * v;
    lp += state
        .gamma
        .iter()
        .zip(state.hs_gamma.prior_precisions())
        .map(|(g, p)| gauss(*g, p))
        .sum::<f64>();
    lp += state.beta.iter().zip(state.mgp.precisions()).map(|(b, p)| gauss(*b, p)).sum::<f64>();
    for q in 0..state.n_neurons() {
        let prec = state.hs_kappa[q].prior_precisions();
        lp += state.kappa.column(q).iter().zip(prec).map(|(k, p)| gauss(*k, p)).sum::<f64>();
        lp += gauss(state.zeta[q], 1.0);
    }
    lp
}

/// Runs a chain from a fresh initial state.
pub fn run_chain<R: Rng + ?Sized>(data: &Dataset, config: &SamplerConfig, rng: &mut R) -> Result<ChainOutput> {
    run_chain_from(data, config, None, rng)
}

/// Runs a chain, optionally starting from `init` (warm start). The initial
/// state's volatility path is resized to the data length when it differs.
pub fn run_chain_from<R: Rng + ?Sized>(
    data: &Dataset,
    config: &SamplerConfig,
    init: Option<&NetworkState>,
    rng: &mut R,
) -> Result<ChainOutput> {
    config.validate()?;
    data.check_estimable()?;
    let started = Instant::now();
    let k = data.n_covariates();
    let q = config.neuron_count(k);
    let mut state = match init {
        Some(s) => warm_state(s, data, config)?,
        None => new_network_state(k, q, &data.y, config, rng)?,
    };
    let mut kernel = KernelState::new(q, config);
    let retained = config.n_retained();
    let mut draws = Vec::with_capacity(retained);
    let mut lps = Vec::with_capacity(retained);
    let mut qstar = Vec::with_capacity(retained);
    for i in 0..config.n_draws {
        if i == config.n_burn {
            kernel.freeze();
            kernel.reset_tallies();
        }
        state = gibbs_sweep(&state, data, config, &mut kernel, rng).map_err(|e| BnnError::Sweep {
            index: i,
            source: Box::new(e),
        })?;
        if i >= config.n_burn && (i - config.n_burn) % config.thin == 0 {
            state.validate().map_err(|e| BnnError::Sweep {
                index: i,
                source: Box::new(e),
            })?;
            lps.push(log_posterior(&state, data));
            qstar.push(effective_neurons(&state.mgp, config.neuron_threshold));
            draws.push(state.clone());
        }
    }
    Ok(ChainOutput {
        draws,
        log_posterior: lps,
        qstar,
        acceptance: kernel.acceptance,
        final_state: state,
        thin: config.thin,
        n_sweeps: config.n_draws,
        n_burn: config.n_burn,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

fn warm_state(init: &NetworkState, data: &Dataset, config: &SamplerConfig) -> Result<NetworkState> {
    let k = data.n_covariates();
    if init.n_covariates() != k || init.n_neurons() != config.neuron_count(k) {
        return Err(BnnError::Dimension(format!(
            "warm-start state has K = {}, Q = {}; data and config need K = {k}, Q = {}",
            init.n_covariates(),
            init.n_neurons(),
            config.neuron_count(k)
        )));
    }
    let mut s = init.clone();
    let t = data.len();
    let last = *s.sv.log_vol.last().unwrap_or(&s.sv.mu);
    s.sv.log_vol.resize(t, last);
    s.validate()?;
    Ok(s)
}

/// Predictive draws at `x_new`, one per retained state. The variance is the
/// `horizon`-step-ahead volatility forecast of each state.
pub fn predict<R: Rng + ?Sized>(
    chain: &ChainOutput,
    x_new: &[f64],
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<PredictiveDraw>> {
    if horizon == 0 {
        return Err(BnnError::Argument("forecast horizon must be at least 1".into()));
    }
    if chain.is_empty() {
        return Err(BnnError::InsufficientDraws { needed: 1, got: 0 });
    }
    chain
        .draws
        .iter()
        .map(|state| {
            let mean = conditional_mean(state, x_new)?;
            let variance = *sv_forecast(&state.sv, horizon, rng)?.last().expect("horizon >= 1");
            let noise = Normal::new(0.0, variance.sqrt()).map_err(|e| BnnError::Argument(e.to_string()))?;
            Ok(PredictiveDraw {
                mean,
                variance,
                draw: mean + noise.sample(rng),
            })
        })
        .collect()
}

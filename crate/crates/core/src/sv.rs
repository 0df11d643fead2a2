//! Stochastic volatility block.
//!
//! The squared residuals are linearised as `log(ε_t² + c) = ν_t + e_t` where
//! `e_t` is a log χ²(1) variate approximated by a ten component Gaussian
//! mixture. Conditional on the mixture indicators the log-volatility path is
//! a linear Gaussian state space model and is drawn jointly by forward
//! filtering, backward sampling. The AR(1) parameters are then updated in the
//! centred parameterisation and optionally again in the non-centred one
//! (ancillarity-sufficiency interweaving).
//!
//! Priors: μ ~ N(0, 10), (ρ+1)/2 ~ Beta(25, 5), ξ² ~ Gamma(1/2, rate 1/2).
//! In constant-variance mode σ² ~ InvGamma(0.01, 0.01).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{BnnError, Result};
use crate::model::SvState;
use crate::stats::{self, inv_gamma_draw};

/// Offset added to squared residuals before taking logs.
pub const LOG_OFFSET: f64 = 1e-8;

/// Ten-component mixture approximation of the log χ²(1) distribution:
/// weights, means and variances.
pub const MIX_WEIGHTS: [f64; 10] = [
    0.00609, 0.04775, 0.13057, 0.20674, 0.22715, 0.18842, 0.12047, 0.05591, 0.01575, 0.00115,
];
pub const MIX_MEANS: [f64; 10] = [
    1.92677, 1.34744, 0.73504, 0.02266, -0.85173, -1.97278, -3.46788, -5.55246, -8.68384, -14.65000,
];
pub const MIX_VARS: [f64; 10] = [
    0.11265, 0.17788, 0.26768, 0.40611, 0.62699, 0.98583, 1.57469, 2.54498, 4.16591, 7.33342,
];

const MU_PRIOR_VAR: f64 = 10.0;
const RHO_PRIOR_A: f64 = 25.0;
const RHO_PRIOR_B: f64 = 5.0;
/// ξ² ~ Gamma(1/2, rate 1/2), i.e. ±ξ ~ N(0, 1).
const XI_PRIOR_RATE: f64 = 0.5;
const HOMO_PRIOR_SHAPE: f64 = 0.01;
const HOMO_PRIOR_RATE: f64 = 0.01;
const MAX_RHO_TRIES: usize = 100;
const STATE_VAR_FLOOR: f64 = 1e-12;
const STATE_VAR_CEIL: f64 = 1e6;

/// Settings for one SV update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvOptions {
    /// Keep ρ at this value instead of sampling it.
    pub rho_fixed: Option<f64>,
    pub interweave: bool,
}

impl Default for SvOptions {
    fn default() -> Self {
        Self {
            rho_fixed: None,
            interweave: true,
        }
    }
}

/// Log of the squared residuals plus offset.
pub fn log_squares(residuals: &[f64]) -> Vec<f64> {
    residuals.iter().map(|e| (e * e + LOG_OFFSET).ln()).collect()
}

/// Draws the mixture component of every `log ε_t²` given the current path.
pub fn draw_indicators<R: Rng + ?Sized>(ystar: &[f64], log_vol: &[f64], rng: &mut R) -> Vec<usize> {
    let mut logw = [0.0; 10];
    ystar
        .iter()
        .zip(log_vol)
        .map(|(y, v)| {
            let d = y - v;
            for i in 0..10 {
                let e = d - MIX_MEANS[i];
                logw[i] = MIX_WEIGHTS[i].ln() - 0.5 * MIX_VARS[i].ln() - 0.5 * e * e / MIX_VARS[i];
            }
            let lse = stats::log_sum_exp(&logw);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, lw) in logw.iter().enumerate() {
                acc += (lw - lse).exp();
                if u < acc {
                    return i;
                }
            }
            9
        })
        .collect()
}

/// Forward Kalman filter for `obs_t = ν_t + N(0, obs_var_t)` with a
/// stationary AR(1) state. Returns filtered means and variances and the
/// one-step predictions used by the backward pass.
struct Filtered {
    mean: Vec<f64>,
    var: Vec<f64>,
    pred_mean: Vec<f64>,
    pred_var: Vec<f64>,
}

fn kalman_filter(obs: &[f64], obs_var: &[f64], mu: f64, rho: f64, state_var: f64) -> Filtered {
    let t = obs.len();
    let mut f = Filtered {
        mean: vec![0.0; t],
        var: vec![0.0; t],
        pred_mean: vec![0.0; t],
        pred_var: vec![0.0; t],
    };
    let mut a = mu;
    let mut p = state_var / (1.0 - rho * rho);
    for i in 0..t {
        f.pred_mean[i] = a;
        f.pred_var[i] = p;
        let gain = p / (p + obs_var[i]);
        let m = a + gain * (obs[i] - a);
        let c = p * obs_var[i] / (p + obs_var[i]);
        f.mean[i] = m;
        f.var[i] = c;
        a = mu + rho * (m - mu);
        p = rho * rho * c + state_var;
    }
    f
}

/// Joint draw of the state path by forward filtering, backward sampling.
pub fn ffbs<R: Rng + ?Sized>(
    obs: &[f64],
    obs_var: &[f64],
    mu: f64,
    rho: f64,
    state_var: f64,
    rng: &mut R,
) -> Vec<f64> {
    let t = obs.len();
    let f = kalman_filter(obs, obs_var, mu, rho, state_var);
    let mut path = vec![0.0; t];
    let z: f64 = rng.sample(StandardNormal);
    path[t - 1] = f.mean[t - 1] + f.var[t - 1].sqrt() * z;
    for i in (0..t - 1).rev() {
        let c = f.var[i];
        let g = c * rho / f.pred_var[i + 1];
        let m = f.mean[i] + g * (path[i + 1] - f.pred_mean[i + 1]);
        let v = (c - g * rho * c).max(0.0);
        let z: f64 = rng.sample(StandardNormal);
        path[i] = m + v.sqrt() * z;
    }
    path
}

/// Smoothed state means (Rauch–Tung–Striebel), the mean of [`ffbs`] draws.
pub fn smoother_mean(obs: &[f64], obs_var: &[f64], mu: f64, rho: f64, state_var: f64) -> Vec<f64> {
    let t = obs.len();
    let f = kalman_filter(obs, obs_var, mu, rho, state_var);
    let mut s = vec![0.0; t];
    s[t - 1] = f.mean[t - 1];
    for i in (0..t - 1).rev() {
        let g = f.var[i] * rho / f.pred_var[i + 1];
        s[i] = f.mean[i] + g * (s[i + 1] - f.pred_mean[i + 1]);
    }
    s
}

/// Draws the log-volatility path given residuals and the current parameters.
/// Returns the path and the mixture indicators it was conditioned on.
pub fn draw_log_vol_path<R: Rng + ?Sized>(
    residuals: &[f64],
    state: &SvState,
    rng: &mut R,
) -> (Vec<f64>, Vec<usize>) {
    let ystar = log_squares(residuals);
    let s = draw_indicators(&ystar, &state.log_vol, rng);
    let obs: Vec<f64> = ystar.iter().zip(&s).map(|(y, &i)| y - MIX_MEANS[i]).collect();
    let obs_var: Vec<f64> = s.iter().map(|&i| MIX_VARS[i]).collect();
    let path = ffbs(&obs, &obs_var, state.mu, state.rho, state.state_var, rng);
    (path, s)
}

fn rho_log_prior(rho: f64) -> f64 {
    let u = (1.0 + rho) / 2.0;
    (RHO_PRIOR_A - 1.0) * u.ln() + (RHO_PRIOR_B - 1.0) * (1.0 - u).ln()
}

fn mu_log_prior(mu: f64) -> f64 {
    -0.5 * mu * mu / MU_PRIOR_VAR
}

/// Log density of ν_1 under the stationary distribution (up to a constant).
fn initial_log_density(nu1: f64, mu: f64, rho: f64, state_var: f64) -> f64 {
    let v = state_var / (1.0 - rho * rho);
    -0.5 * v.ln() - 0.5 * (nu1 - mu) * (nu1 - mu) / v
}

/// Sum of squared state innovations including the stationary first term.
fn state_sum_squares(nu: &[f64], mu: f64, rho: f64) -> f64 {
    let first = (1.0 - rho * rho) * (nu[0] - mu) * (nu[0] - mu);
    first
        + nu.windows(2)
            .map(|w| {
                let e = w[1] - mu - rho * (w[0] - mu);
                e * e
            })
            .sum::<f64>()
}

/// μ | ν, ρ, ξ² is Gaussian under the N(0, 10) prior.
fn draw_mu_given_rho<R: Rng + ?Sized>(nu: &[f64], rho: f64, state_var: f64, rng: &mut R) -> f64 {
    let w1 = 1.0 - rho * rho;
    let c = 1.0 - rho;
    let n_rest = (nu.len() - 1) as f64;
    let prec = 1.0 / MU_PRIOR_VAR + (w1 + n_rest * c * c) / state_var;
    let lin = (w1 * nu[0] + c * nu.windows(2).map(|w| w[1] - rho * w[0]).sum::<f64>()) / state_var;
    let z: f64 = rng.sample(StandardNormal);
    lin / prec + z / prec.sqrt()
}

/// Independence Metropolis–Hastings step for (μ, ρ): the proposal is the
/// Gaussian regression posterior of `ν_t = α + ρ ν_{t-1}` under a flat prior,
/// with `μ = α / (1 - ρ)`. Returns `None` when the regression is degenerate.
fn draw_mu_rho<R: Rng + ?Sized>(nu: &[f64], state: &SvState, rng: &mut R) -> Option<(f64, f64)> {
    let n = nu.len() - 1;
    if n < 3 {
        return None;
    }
    let (mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for w in nu.windows(2) {
        sx += w[0];
        sxx += w[0] * w[0];
        sy += w[1];
        sxy += w[0] * w[1];
    }
    let nf = n as f64;
    let det = nf * sxx - sx * sx;
    if !(det > 1e-12 * nf * sxx.max(1.0)) {
        return None;
    }
    // (X'X)^{-1}
    let i00 = sxx / det;
    let i01 = -sx / det;
    let i11 = nf / det;
    let alpha_hat = i00 * sy + i01 * sxy;
    let rho_hat = i01 * sy + i11 * sxy;
    let s2 = state.state_var;
    // Cholesky of s2 * (X'X)^{-1}
    let l00 = (s2 * i00).sqrt();
    let l10 = s2 * i01 / l00;
    let l11 = (s2 * i11 - l10 * l10).max(0.0).sqrt();

    let mut proposal = None;
    for _ in 0..MAX_RHO_TRIES {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let alpha = alpha_hat + l00 * z0;
        let rho = rho_hat + l10 * z0 + l11 * z1;
        if rho.abs() < 1.0 {
            proposal = Some((alpha / (1.0 - rho), rho));
            break;
        }
    }
    let (mu_new, rho_new) = proposal?;
    let target = |mu: f64, rho: f64| {
        initial_log_density(nu[0], mu, rho, s2) + mu_log_prior(mu) + rho_log_prior(rho) - (1.0 - rho).abs().ln()
    };
    let log_ratio = target(mu_new, rho_new) - target(state.mu, state.rho);
    let u: f64 = rng.random();
    if log_ratio.is_finite() && u.ln() < log_ratio {
        Some((mu_new, rho_new))
    } else {
        Some((state.mu, state.rho))
    }
}

/// Metropolis–Hastings step for ξ² with an inverse-gamma proposal matching
/// the likelihood; the Gamma(1/2, 1/2) prior enters through the acceptance
/// probability `exp(-(ξ²' - ξ²)/2)`.
fn draw_state_var<R: Rng + ?Sized>(nu: &[f64], mu: f64, rho: f64, current: f64, rng: &mut R) -> f64 {
    let ss = state_sum_squares(nu, mu, rho);
    let shape = (nu.len() as f64 - 1.0) / 2.0;
    let prop = inv_gamma_draw(rng, shape, ss / 2.0).clamp(STATE_VAR_FLOOR, STATE_VAR_CEIL);
    let log_ratio = -XI_PRIOR_RATE * (prop - current);
    let u: f64 = rng.random();
    if u.ln() < log_ratio {
        prop
    } else {
        current
    }
}

/// Non-centred move: given `ν̃ = (ν - μ)/ξ`, (μ, ξ) enter the observation
/// equation linearly and have a bivariate Gaussian conditional.
fn interweave<R: Rng + ?Sized>(
    ystar: &[f64],
    indicators: &[usize],
    nu: &mut [f64],
    mu: &mut f64,
    state_var: &mut f64,
    rng: &mut R,
) {
    let xi = state_var.sqrt();
    let tilde: Vec<f64> = nu.iter().map(|v| (v - *mu) / xi).collect();
    // precision matrix and linear term of (μ, ξ)
    let (mut p00, mut p01, mut p11) = (1.0 / MU_PRIOR_VAR, 0.0, 2.0 * XI_PRIOR_RATE);
    let (mut b0, mut b1) = (0.0, 0.0);
    for ((y, &s), u) in ystar.iter().zip(indicators).zip(&tilde) {
        let w = 1.0 / MIX_VARS[s];
        let r = y - MIX_MEANS[s];
        p00 += w;
        p01 += w * u;
        p11 += w * u * u;
        b0 += w * r;
        b1 += w * r * u;
    }
    let det = p00 * p11 - p01 * p01;
    if !(det > 0.0) {
        return;
    }
    let m0 = (p11 * b0 - p01 * b1) / det;
    let m1 = (p00 * b1 - p01 * b0) / det;
    // draw N(m, P^{-1}) via the Cholesky factor of P
    let l00 = p00.sqrt();
    let l10 = p01 / l00;
    let l11 = (p11 - l10 * l10).max(1e-300).sqrt();
    let z0: f64 = rng.sample(StandardNormal);
    let z1: f64 = rng.sample(StandardNormal);
    // solve L' e = z
    let e1 = z1 / l11;
    let e0 = (z0 - l10 * e1) / l00;
    let new_mu = m0 + e0;
    let new_xi = m1 + e1;
    let new_var = new_xi * new_xi;
    if !(new_var > STATE_VAR_FLOOR && new_var < STATE_VAR_CEIL && new_mu.is_finite()) {
        return;
    }
    for (v, u) in nu.iter_mut().zip(&tilde) {
        *v = new_mu + new_xi * u;
    }
    *mu = new_mu;
    *state_var = new_var;
}

/// Conjugate draw of a constant error variance.
pub fn homoskedastic_update<R: Rng + ?Sized>(residuals: &[f64], rng: &mut R) -> SvState {
    let ss: f64 = residuals.iter().map(|e| e * e).sum();
    let shape = HOMO_PRIOR_SHAPE + residuals.len() as f64 / 2.0;
    let var = inv_gamma_draw(rng, shape, HOMO_PRIOR_RATE + ss / 2.0);
    SvState::constant(residuals.len(), var)
}

/// One update of the volatility block given conditional-mean residuals.
pub fn sv_update<R: Rng + ?Sized>(
    residuals: &[f64],
    state: &SvState,
    options: &SvOptions,
    rng: &mut R,
) -> Result<SvState> {
    let t = residuals.len();
    if t != state.log_vol.len() {
        return Err(BnnError::Dimension(format!(
            "{} residuals for a volatility path of length {}",
            t,
            state.log_vol.len()
        )));
    }
    if t < 2 {
        return Err(BnnError::InvalidData("volatility update needs T >= 2".into()));
    }
    state.validate()?;
    if state.homoskedastic {
        return Ok(homoskedastic_update(residuals, rng));
    }

    let ystar = log_squares(residuals);
    let indicators = draw_indicators(&ystar, &state.log_vol, rng);
    let obs: Vec<f64> = ystar.iter().zip(&indicators).map(|(y, &i)| y - MIX_MEANS[i]).collect();
    let obs_var: Vec<f64> = indicators.iter().map(|&i| MIX_VARS[i]).collect();
    let mut nu = ffbs(&obs, &obs_var, state.mu, state.rho, state.state_var, rng);

    let mut next = SvState {
        log_vol: Vec::new(),
        ..state.clone()
    };
    match options.rho_fixed {
        Some(rho) => {
            next.rho = rho;
            next.mu = draw_mu_given_rho(&nu, rho, next.state_var, rng);
        }
        None => {
            let tmp = SvState {
                log_vol: Vec::new(),
                ..next.clone()
            };
            match draw_mu_rho(&nu, &tmp, rng) {
                Some((mu, rho)) => {
                    next.mu = mu;
                    next.rho = rho;
                }
                None => next.mu = draw_mu_given_rho(&nu, next.rho, next.state_var, rng),
            }
        }
    }
    next.state_var = draw_state_var(&nu, next.mu, next.rho, next.state_var, rng);
    if options.interweave {
        interweave(&ystar, &indicators, &mut nu, &mut next.mu, &mut next.state_var, rng);
    }
    next.log_vol = nu;
    next.validate()?;
    Ok(next)
}

/// Forecast variances σ²_{T+1..T+h} by iterating the AR(1) forward.
pub fn sv_forecast<R: Rng + ?Sized>(state: &SvState, horizon: usize, rng: &mut R) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(BnnError::Argument("forecast horizon must be at least 1".into()));
    }
    if state.homoskedastic {
        return Ok(vec![state.mu.exp(); horizon]);
    }
    let sd = state.state_var.max(0.0).sqrt();
    let mut nu = *state
        .log_vol
        .last()
        .ok_or_else(|| BnnError::StateCorruption("empty volatility path".into()))?;
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let z: f64 = rng.sample(StandardNormal);
        nu = state.mu + state.rho * (nu - state.mu) + sd * z;
        out.push(nu.exp().clamp(f64::MIN_POSITIVE, f64::MAX));
    }
    Ok(out)
}

/// Simulates an AR(1) log-volatility path from its stationary distribution.
pub fn simulate_log_vol<R: Rng + ?Sized>(t: usize, mu: f64, rho: f64, state_var: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(t);
    let init = rand_distr::Normal::new(mu, (state_var / (1.0 - rho * rho)).sqrt()).expect("valid normal");
    let mut nu = init.sample(rng);
    for _ in 0..t {
        out.push(nu);
        let z: f64 = rng.sample(StandardNormal);
        nu = mu + rho * (nu - mu) + state_var.sqrt() * z;
    }
    out
}

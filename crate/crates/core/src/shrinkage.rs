//! Gibbs updates for the horseshoe blocks and the multiplicative gamma
//! process on the neuron loadings, plus the two effective-neuron counts.
//!
//! Every conditional is exposed as a parameter pair (see [`InvGammaParams`]
//! and [`GammaParams`]) separately from the random draw, so the algebra can
//! be checked without sampling.
//!
//! Parameterisation: `InvGamma(a, b)` has density ∝ `x^{-a-1} exp(-b/x)` and
//! `Gamma(a, b)` has density ∝ `x^{a-1} exp(-b x)`; `b` is always a rate.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{BnnError, Result};
use crate::model::{HorseshoeState, MgpState};
use crate::stats::{self, gamma_draw, inv_gamma_draw};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl InvGammaParams {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        inv_gamma_draw(rng, self.shape, self.rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl GammaParams {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        stats::clamp_scale(gamma_draw(rng, self.shape, self.rate))
    }
}

/// φ²_j | · ~ InvGamma(1, 1/c_j + b_j² / (2λ²)).
pub fn local_scale_conditional(coef: f64, aux_local: f64, global_scale_sq: f64) -> InvGammaParams {
    InvGammaParams {
        shape: 1.0,
        rate: 1.0 / aux_local + coef * coef / (2.0 * global_scale_sq),
    }
}

/// λ² | · ~ InvGamma((n+1)/2, 1/d + Σ_j b_j² / (2φ²_j)).
pub fn global_scale_conditional(coeffs: &[f64], local_scales_sq: &[f64], aux_global: f64) -> InvGammaParams {
    let ss: f64 = coeffs
        .iter()
        .zip(local_scales_sq)
        .map(|(b, p)| b * b / (2.0 * p))
        .sum();
    InvGammaParams {
        shape: (coeffs.len() as f64 + 1.0) / 2.0,
        rate: 1.0 / aux_global + ss,
    }
}

/// c_j | · ~ InvGamma(1, 1 + 1/φ²_j).
pub fn aux_local_conditional(local_scale_sq: f64) -> InvGammaParams {
    InvGammaParams {
        shape: 1.0,
        rate: 1.0 + 1.0 / local_scale_sq,
    }
}

/// d | · ~ InvGamma(1, 1 + 1/λ²).
pub fn aux_global_conditional(global_scale_sq: f64) -> InvGammaParams {
    InvGammaParams {
        shape: 1.0,
        rate: 1.0 + 1.0 / global_scale_sq,
    }
}

/// One Gibbs pass over a horseshoe block: local scales, global scale, local
/// auxiliaries, global auxiliary, each conditional on the freshest values.
pub fn horseshoe_update<R: Rng + ?Sized>(
    coeffs: &[f64],
    state: &HorseshoeState,
    rng: &mut R,
) -> Result<HorseshoeState> {
    if coeffs.len() != state.len() {
        return Err(BnnError::Dimension(format!(
            "{} coefficients for a horseshoe block of size {}",
            coeffs.len(),
            state.len()
        )));
    }
    state.validate()?;
    let mut next = state.clone();
    for j in 0..coeffs.len() {
        next.local_scales_sq[j] =
            local_scale_conditional(coeffs[j], next.aux_local[j], next.global_scale_sq).draw(rng);
    }
    next.global_scale_sq = global_scale_conditional(coeffs, &next.local_scales_sq, next.aux_global).draw(rng);
    for j in 0..coeffs.len() {
        next.aux_local[j] = aux_local_conditional(next.local_scales_sq[j]).draw(rng);
    }
    next.aux_global = aux_global_conditional(next.global_scale_sq).draw(rng);
    Ok(next)
}

/// Conditional of the MGP component `r` (zero based) given β and the other
/// components:
///
/// `ϱ_r | · ~ Gamma(a + (Q - r)/2, 1 + ½ Σ_{q ≥ r} β_q² ∏_{l ≤ q, l ≠ r} ϱ_l)`
///
/// with `a = a1` for the first component and `a2` afterwards.
pub fn mgp_conditional(beta: &[f64], state: &MgpState, r: usize) -> GammaParams {
    let q = beta.len();
    let a = if r == 0 { state.a1 } else { state.a2 };
    // leave-one-out cumulative product, starting at the product of the components before r
    let mut loo: f64 = state.components[..r].iter().product();
    let mut ss = 0.0;
    for j in r..q {
        if j > r {
            loo *= state.components[j];
        }
        ss += loo * beta[j] * beta[j];
    }
    GammaParams {
        shape: a + (q - r) as f64 / 2.0,
        rate: 1.0 + 0.5 * ss,
    }
}

/// Sequential Gibbs update of every MGP component.
pub fn mgp_update<R: Rng + ?Sized>(beta: &[f64], state: &MgpState, rng: &mut R) -> Result<MgpState> {
    if beta.len() != state.len() {
        return Err(BnnError::Dimension(format!(
            "{} loadings for {} MGP components",
            beta.len(),
            state.len()
        )));
    }
    let mut next = state.clone();
    for r in 0..beta.len() {
        next.components[r] = mgp_conditional(beta, &next, r).draw(rng);
    }
    Ok(next)
}

/// Q* = number of neurons whose prior variance φ_{β_q}^{-1} exceeds `tau`.
pub fn effective_neurons(mgp: &MgpState, tau: f64) -> usize {
    mgp.variances().iter().filter(|&&v| v > tau).count()
}

/// Minimum number of draws accepted by [`active_neurons_ci`].
pub const MIN_CI_DRAWS: usize = 20;

/// Number of neurons whose empirical 5%–95% interval of β_q excludes zero.
///
/// The interval is closed, so a degenerate interval at zero counts as
/// containing it.
pub fn active_neurons_ci(beta_draws: &DMatrix<f64>) -> Result<usize> {
    let s = beta_draws.nrows();
    if s < MIN_CI_DRAWS {
        return Err(BnnError::InsufficientDraws {
            needed: MIN_CI_DRAWS,
            got: s,
        });
    }
    let count = beta_draws
        .column_iter()
        .filter(|col| {
            let mut v: Vec<f64> = col.iter().copied().collect();
            v.sort_by(f64::total_cmp);
            let lo = stats::quantile_sorted(&v, 0.05);
            let hi = stats::quantile_sorted(&v, 0.95);
            lo > 0.0 || hi < 0.0
        })
        .count();
    Ok(count)
}

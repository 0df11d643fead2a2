//! Hamiltonian Monte Carlo for the per-neuron weight vectors.
//!
//! The sampled vector is `(κ_q, ζ_q)` with `K + 1` coordinates. The kernel is
//! the multinomial No-U-Turn sampler with the generalised U-turn criterion
//! (including the checks across merged sub-trees), an identity mass matrix
//! and dual-averaging step-size adaptation.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::activation;
use crate::error::{BnnError, Result};
use crate::model::{ActivationKind, Dataset, NetworkState};
use crate::stats::log_add_exp;

/// Energy error beyond which a trajectory counts as divergent.
const MAX_ENERGY_ERROR: f64 = 1000.0;

/// A differentiable log density.
pub trait Target {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], grad: &mut [f64]);

    /// Log density and gradient together; override when they share work.
    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.gradient(x, grad);
        self.log_density(x)
    }
}

/// Log conditional posterior of `(κ_q, ζ_q)`:
///
/// `-½ Σ_t (ỹ_t - β_q h(x_t'κ_q + ζ_q))² / σ_t² - ½ Σ_j φ_{κ_jq} κ_jq² - ½ ζ_q²`
///
/// where ỹ is the partial residual excluding neuron `q`. The additive constant
/// (normalisers of the Gaussian likelihood and priors) is dropped, so values
/// are comparable only between calls sharing `x`, `residual`, the variances
/// and the prior precisions.
pub struct NeuronTarget<'a> {
    pub x: &'a DMatrix<f64>,
    pub residual: &'a [f64],
    pub inv_variances: &'a [f64],
    /// Prior precisions `1 / (λ² φ²_j)` of κ_q.
    pub prior_precisions: &'a [f64],
    pub beta: f64,
    pub kind: ActivationKind,
}

/// Prior precision of the neuron bias.
pub const BIAS_PRIOR_PRECISION: f64 = 1.0;

impl<'a> NeuronTarget<'a> {
    pub fn new(
        x: &'a DMatrix<f64>,
        residual: &'a [f64],
        inv_variances: &'a [f64],
        prior_precisions: &'a [f64],
        beta: f64,
        kind: ActivationKind,
    ) -> Result<Self> {
        let t = x.nrows();
        if residual.len() != t || inv_variances.len() != t {
            return Err(BnnError::Dimension(format!(
                "residual ({}) / variance ({}) length differs from T = {t}",
                residual.len(),
                inv_variances.len()
            )));
        }
        if prior_precisions.len() != x.ncols() {
            return Err(BnnError::Dimension(format!(
                "{} prior precisions for K = {}",
                prior_precisions.len(),
                x.ncols()
            )));
        }
        Ok(Self {
            x,
            residual,
            inv_variances,
            prior_precisions,
            beta,
            kind,
        })
    }

    fn check(&self, kappa_aug: &[f64]) -> Result<()> {
        if kappa_aug.len() != self.dim() {
            return Err(BnnError::Dimension(format!(
                "position has length {}, expected K + 1 = {}",
                kappa_aug.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Neuron inputs z_t = x_t'κ + ζ.
    fn inputs(&self, kappa_aug: &[f64]) -> Vec<f64> {
        let k = self.x.ncols();
        let mut z = vec![kappa_aug[k]; self.x.nrows()];
        for (j, col) in self.x.column_iter().enumerate() {
            let w = kappa_aug[j];
            if w != 0.0 {
                for (zt, xt) in z.iter_mut().zip(col.iter()) {
                    *zt += w * xt;
                }
            }
        }
        z
    }

    fn log_prior(&self, kappa_aug: &[f64]) -> f64 {
        let k = self.x.ncols();
        let kp: f64 = kappa_aug[..k]
            .iter()
            .zip(self.prior_precisions)
            .map(|(w, p)| p * w * w)
            .sum();
        -0.5 * kp - 0.5 * BIAS_PRIOR_PRECISION * kappa_aug[k] * kappa_aug[k]
    }

    pub fn checked_log_density(&self, kappa_aug: &[f64]) -> Result<f64> {
        self.check(kappa_aug)?;
        Ok(self.log_density(kappa_aug))
    }

    pub fn checked_gradient(&self, kappa_aug: &[f64]) -> Result<Vec<f64>> {
        self.check(kappa_aug)?;
        let mut g = vec![0.0; self.dim()];
        self.gradient(kappa_aug, &mut g);
        Ok(g)
    }
}

impl Target for NeuronTarget<'_> {
    fn dim(&self) -> usize {
        self.x.ncols() + 1
    }

    fn log_density(&self, kappa_aug: &[f64]) -> f64 {
        let z = self.inputs(kappa_aug);
        let ll: f64 = z
            .iter()
            .zip(self.residual)
            .zip(self.inv_variances)
            .map(|((zt, r), w)| {
                let e = r - self.beta * activation::act_eval(self.kind, *zt);
                e * e * w
            })
            .sum();
        -0.5 * ll + self.log_prior(kappa_aug)
    }

    fn gradient(&self, kappa_aug: &[f64], grad: &mut [f64]) {
        self.log_density_and_gradient(kappa_aug, grad);
    }

    fn log_density_and_gradient(&self, kappa_aug: &[f64], grad: &mut [f64]) -> f64 {
        let k = self.x.ncols();
        let z = self.inputs(kappa_aug);
        let mut ll = 0.0;
        // w_t = (ỹ_t - β h(z_t)) β h'(z_t) / σ_t²
        let w: Vec<f64> = z
            .iter()
            .zip(self.residual)
            .zip(self.inv_variances)
            .map(|((zt, r), iv)| {
                let (h, dh) = activation::act_eval_grad(self.kind, *zt);
                let e = r - self.beta * h;
                ll += e * e * iv;
                e * self.beta * dh * iv
            })
            .collect();
        for (j, col) in self.x.column_iter().enumerate() {
            let s: f64 = col.iter().zip(&w).map(|(a, b)| a * b).sum();
            grad[j] = s - self.prior_precisions[j] * kappa_aug[j];
        }
        grad[k] = w.iter().sum::<f64>() - BIAS_PRIOR_PRECISION * kappa_aug[k];
        -0.5 * ll + self.log_prior(kappa_aug)
    }
}

/// A target expressed in rescaled coordinates `u` with `x = scales ⊙ u`.
///
/// Running an identity-mass kernel on `u` is the same as running it on `x`
/// with mass matrix `diag(1 / scales²)`. The Jacobian is constant and dropped.
pub struct Rescaled<'a, T: Target + ?Sized> {
    pub inner: &'a T,
    pub scales: Vec<f64>,
}

impl<'a, T: Target + ?Sized> Rescaled<'a, T> {
    pub fn new(inner: &'a T, scales: Vec<f64>) -> Result<Self> {
        if scales.len() != inner.dim() {
            return Err(BnnError::Dimension(format!(
                "{} scales for a target of dimension {}",
                scales.len(),
                inner.dim()
            )));
        }
        Ok(Self { inner, scales })
    }

    pub fn to_inner(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.scales).map(|(a, s)| a * s).collect()
    }

    pub fn from_inner(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.scales).map(|(a, s)| a / s).collect()
    }
}

impl<T: Target + ?Sized> Target for Rescaled<'_, T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_density(&self, u: &[f64]) -> f64 {
        self.inner.log_density(&self.to_inner(u))
    }

    fn gradient(&self, u: &[f64], grad: &mut [f64]) {
        self.log_density_and_gradient(u, grad);
    }

    fn log_density_and_gradient(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        let lp = self.inner.log_density_and_gradient(&self.to_inner(u), grad);
        for (g, s) in grad.iter_mut().zip(&self.scales) {
            *g *= s;
        }
        lp
    }
}

/// Prior precisions of neuron `q`'s weights and the inverse error variances
/// of `state`, in the form [`NeuronTarget`] borrows them.
pub fn neuron_context(state: &NetworkState, q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if q >= state.n_neurons() {
        return Err(BnnError::Dimension(format!(
            "neuron {q} requested from a network with {} neurons",
            state.n_neurons()
        )));
    }
    let prec = state.hs_kappa[q].prior_precisions();
    let inv_var = state.sv.log_vol.iter().map(|v| (-v).exp()).collect();
    Ok((prec, inv_var))
}

/// Log conditional posterior of `(κ_q, ζ_q)` at `kappa_aug` given the rest of
/// `state`. `residual` is the partial residual that excludes neuron `q`.
/// The additive constant dropped is the same as in [`NeuronTarget`].
pub fn neuron_log_posterior(
    kappa_aug: &[f64],
    q: usize,
    residual: &[f64],
    state: &NetworkState,
    data: &Dataset,
) -> Result<f64> {
    let (prec, inv_var) = neuron_context(state, q)?;
    NeuronTarget::new(&data.x, residual, &inv_var, &prec, state.beta[q], state.delta[q])?
        .checked_log_density(kappa_aug)
}

/// Gradient of [`neuron_log_posterior`] with respect to `kappa_aug`.
pub fn neuron_grad(
    kappa_aug: &[f64],
    q: usize,
    residual: &[f64],
    state: &NetworkState,
    data: &Dataset,
) -> Result<Vec<f64>> {
    let (prec, inv_var) = neuron_context(state, q)?;
    NeuronTarget::new(&data.x, residual, &inv_var, &prec, state.beta[q], state.delta[q])?.checked_gradient(kappa_aug)
}

/// Outcome of a leapfrog integration.
#[derive(Debug, Clone, PartialEq)]
pub struct LeapfrogResult {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    /// Set when a non-finite position, momentum or gradient appeared.
    pub divergent: bool,
}

/// `n_steps` leapfrog steps: half-step momentum, full-step position,
/// half-step momentum. `grad_fn` returns the gradient of the log density.
pub fn leapfrog<F>(position: &[f64], momentum: &[f64], step_size: f64, mut grad_fn: F, n_steps: usize) -> LeapfrogResult
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let mut q = position.to_vec();
    let mut p = momentum.to_vec();
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if n_steps == 0 {
        return LeapfrogResult {
            position: q,
            momentum: p,
            divergent: false,
        };
    }
    let mut g = grad_fn(&q);
    for _ in 0..n_steps {
        if !finite(&g) {
            return LeapfrogResult {
                position: q,
                momentum: p,
                divergent: true,
            };
        }
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi += 0.5 * step_size * gi;
        }
        for (qi, pi) in q.iter_mut().zip(&p) {
            *qi += step_size * pi;
        }
        g = grad_fn(&q);
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi += 0.5 * step_size * gi;
        }
        if !finite(&q) || !finite(&p) {
            return LeapfrogResult {
                position: q,
                momentum: p,
                divergent: true,
            };
        }
    }
    LeapfrogResult {
        position: q,
        momentum: p,
        divergent: false,
    }
}

/// NUTS tuning parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NutsConfig {
    pub target_accept: f64,
    pub max_tree_depth: usize,
    /// Number of initial calls during which the step size adapts.
    pub adapt_steps: usize,
    /// Starting step size; non-positive picks one heuristically.
    pub init_step_size: f64,
}

impl Default for NutsConfig {
    fn default() -> Self {
        Self {
            target_accept: 0.8,
            max_tree_depth: 10,
            adapt_steps: 1000,
            init_step_size: 0.0,
        }
    }
}

/// Dual-averaging state of one kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptState {
    pub step_size: f64,
    calls: usize,
    frozen: bool,
    initialised: bool,
    mu: f64,
    h_bar: f64,
    log_step_bar: f64,
    adapt_iter: usize,
}

impl Default for AdaptState {
    fn default() -> Self {
        Self::new()
    }
}

impl AdaptState {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new() -> Self {
        Self {
            step_size: 0.0,
            calls: 0,
            frozen: false,
            initialised: false,
            mu: 0.0,
            h_bar: 0.0,
            log_step_bar: 0.0,
            adapt_iter: 0,
        }
    }

    /// A state with a fixed step size and no adaptation.
    pub fn fixed(step_size: f64) -> Self {
        Self {
            step_size,
            frozen: true,
            initialised: true,
            ..Self::new()
        }
    }

    pub fn is_adapting(&self, config: &NutsConfig) -> bool {
        !self.frozen && self.calls < config.adapt_steps
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Ends adaptation and switches to the averaged step size.
    pub fn freeze(&mut self) {
        if !self.frozen {
            if self.adapt_iter > 0 {
                self.step_size = self.log_step_bar.exp();
            }
            self.frozen = true;
        }
    }

    fn initialise(&mut self, step: f64) {
        self.step_size = step;
        self.mu = (10.0 * step).ln();
        self.h_bar = 0.0;
        self.log_step_bar = 0.0;
        self.adapt_iter = 0;
        self.initialised = true;
    }

    fn update(&mut self, accept_stat: f64, target: f64) {
        self.adapt_iter += 1;
        let m = self.adapt_iter as f64;
        let eta = 1.0 / (m + Self::T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (target - accept_stat);
        let log_step = self.mu - m.sqrt() / Self::GAMMA * self.h_bar;
        let w = m.powf(-Self::KAPPA);
        self.log_step_bar = w * log_step + (1.0 - w) * self.log_step_bar;
        self.step_size = log_step.exp();
    }
}

/// Per-transition diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NutsDiagnostics {
    pub tree_depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
    /// Mean Metropolis acceptance probability over the trajectory.
    pub accept_stat: f64,
    pub step_size: f64,
    pub energy: f64,
}

#[derive(Clone)]
struct Point {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

impl Point {
    fn energy(&self) -> f64 {
        -self.logp + 0.5 * dot(&self.p, &self.p)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// A sub-trajectory stored in physical time order.
struct Tree {
    minus: Point,
    plus: Point,
    proposal: Point,
    rho: Vec<f64>,
    log_sum_weight: f64,
}

#[derive(Default)]
struct Counters {
    n_leapfrog: usize,
    sum_accept: f64,
    divergent: bool,
}

/// Generalised no-U-turn criterion with an identity mass matrix.
fn no_u_turn(p_minus: &[f64], p_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_minus, rho) > 0.0 && dot(p_plus, rho) > 0.0
}

/// Joins two adjacent sub-trees (`a` earlier in time than `b`) and reports
/// whether the merged trajectory still satisfies every U-turn check.
fn merge_criterion(a: &Tree, b: &Tree, rho: &[f64]) -> bool {
    no_u_turn(&a.minus.p, &b.plus.p, rho)
        && no_u_turn(&a.minus.p, &b.minus.p, &add(&a.rho, &b.minus.p))
        && no_u_turn(&a.plus.p, &b.plus.p, &add(&b.rho, &a.plus.p))
}

fn step<T: Target + ?Sized>(target: &T, from: &Point, eps: f64) -> Point {
    let mut p: Vec<f64> = from.p.iter().zip(&from.grad).map(|(p, g)| p + 0.5 * eps * g).collect();
    let q: Vec<f64> = from.q.iter().zip(&p).map(|(q, p)| q + eps * p).collect();
    let mut grad = vec![0.0; q.len()];
    let logp = target.log_density_and_gradient(&q, &mut grad);
    for (pi, gi) in p.iter_mut().zip(&grad) {
        *pi += 0.5 * eps * gi;
    }
    Point { q, p, grad, logp }
}

#[allow(clippy::too_many_arguments)]
fn build_tree<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    from: &Point,
    depth: usize,
    direction: f64,
    eps: f64,
    h0: f64,
    counters: &mut Counters,
    rng: &mut R,
) -> Option<Tree> {
    if depth == 0 {
        let next = step(target, from, direction * eps);
        counters.n_leapfrog += 1;
        let h = next.energy();
        let finite = h.is_finite() && next.q.iter().all(|v| v.is_finite()) && next.grad.iter().all(|v| v.is_finite());
        if !finite || h - h0 > MAX_ENERGY_ERROR {
            counters.divergent = true;
            return None;
        }
        let log_w = h0 - h;
        counters.sum_accept += log_w.exp().min(1.0);
        return Some(Tree {
            rho: next.p.clone(),
            minus: next.clone(),
            plus: next.clone(),
            proposal: next,
            log_sum_weight: log_w,
        });
    }
    let inner = build_tree(target, from, depth - 1, direction, eps, h0, counters, rng)?;
    let edge = if direction > 0.0 { &inner.plus } else { &inner.minus };
    let outer = build_tree(target, edge, depth - 1, direction, eps, h0, counters, rng)?;
    let log_sum_weight = log_add_exp(inner.log_sum_weight, outer.log_sum_weight);
    let take_outer = rng.random::<f64>() < (outer.log_sum_weight - log_sum_weight).exp();
    let (a, b) = if direction > 0.0 { (inner, outer) } else { (outer, inner) };
    let rho = add(&a.rho, &b.rho);
    if !merge_criterion(&a, &b, &rho) {
        return None;
    }
    let outer_proposal = if direction > 0.0 { &b.proposal } else { &a.proposal };
    let proposal = if take_outer {
        outer_proposal.clone()
    } else if direction > 0.0 {
        a.proposal.clone()
    } else {
        b.proposal.clone()
    };
    Some(Tree {
        minus: a.minus,
        plus: b.plus,
        proposal,
        rho,
        log_sum_weight,
    })
}

/// Heuristic initial step size: double or halve until the one-step
/// acceptance probability crosses one half.
fn initial_step_size<T: Target + ?Sized, R: Rng + ?Sized>(target: &T, start: &Point, rng: &mut R) -> f64 {
    let mut eps = 0.1;
    let mut probe = start.clone();
    probe.p = (0..start.q.len()).map(|_| rng.sample(StandardNormal)).collect();
    let h0 = probe.energy();
    let log_accept = |eps: f64| {
        let next = step(target, &probe, eps);
        let d = h0 - next.energy();
        if d.is_finite() {
            d
        } else {
            f64::NEG_INFINITY
        }
    };
    let first = log_accept(eps);
    let dir: f64 = if first > 0.5f64.ln() { 1.0 } else { -1.0 };
    for _ in 0..50 {
        let la = log_accept(eps);
        if dir * la <= dir * 0.5f64.ln() {
            break;
        }
        eps *= 2f64.powf(dir);
    }
    eps.clamp(1e-8, 1e3)
}

/// One NUTS transition from `current`.
///
/// The step size adapts by dual averaging while `adapt` is still adapting
/// (see [`AdaptState::is_adapting`]). A divergent or non-finite trajectory
/// never aborts: the tree built so far supplies the draw, and when nothing
/// valid was built the current point is returned.
pub fn nuts_draw<T: Target + ?Sized, R: Rng + ?Sized>(
    current: &[f64],
    target: &T,
    config: &NutsConfig,
    adapt: &mut AdaptState,
    rng: &mut R,
) -> (Vec<f64>, NutsDiagnostics) {
    let dim = target.dim();
    let mut grad = vec![0.0; dim];
    let logp = target.log_density_and_gradient(current, &mut grad);
    let mut diag = NutsDiagnostics::default();
    if !logp.is_finite() || grad.iter().any(|g| !g.is_finite()) || current.iter().any(|v| !v.is_finite()) {
        diag.divergent = true;
        diag.step_size = adapt.step_size;
        return (current.to_vec(), diag);
    }
    let mut start = Point {
        q: current.to_vec(),
        p: vec![0.0; dim],
        grad,
        logp,
    };
    if !adapt.initialised {
        let eps = if config.init_step_size > 0.0 {
            config.init_step_size
        } else {
            initial_step_size(target, &start, rng)
        };
        adapt.initialise(eps);
    }
    let adapting = adapt.is_adapting(config);
    adapt.calls += 1;
    let eps = adapt.step_size;

    start.p = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let h0 = start.energy();
    let mut tree = Tree {
        rho: start.p.clone(),
        minus: start.clone(),
        plus: start.clone(),
        proposal: start.clone(),
        log_sum_weight: 0.0,
    };
    let mut counters = Counters::default();
    let mut depth = 0;
    while depth < config.max_tree_depth {
        let forward = rng.random::<bool>();
        let direction = if forward { 1.0 } else { -1.0 };
        let edge = if forward { &tree.plus } else { &tree.minus };
        let Some(sub) = build_tree(target, edge, depth, direction, eps, h0, &mut counters, rng) else {
            depth += 1;
            break;
        };
        depth += 1;
        // biased progressive sampling favours the new sub-tree
        let accept = (sub.log_sum_weight - tree.log_sum_weight).exp().min(1.0);
        let new_proposal = rng.random::<f64>() < accept;
        let log_sum_weight = log_add_exp(tree.log_sum_weight, sub.log_sum_weight);
        let (a, b) = if forward { (tree, sub) } else { (sub, tree) };
        let rho = add(&a.rho, &b.rho);
        let keep_going = merge_criterion(&a, &b, &rho);
        let proposal = match (new_proposal, forward) {
            (true, true) => b.proposal,
            (true, false) => a.proposal,
            (false, true) => a.proposal,
            (false, false) => b.proposal,
        };
        tree = Tree {
            minus: a.minus,
            plus: b.plus,
            proposal,
            rho,
            log_sum_weight,
        };
        if !keep_going {
            break;
        }
    }
    diag.tree_depth = depth;
    diag.n_leapfrog = counters.n_leapfrog;
    diag.divergent = counters.divergent;
    diag.accept_stat = if counters.n_leapfrog > 0 {
        counters.sum_accept / counters.n_leapfrog as f64
    } else {
        0.0
    };
    diag.step_size = eps;
    diag.energy = tree.proposal.energy();
    if adapting {
        adapt.update(diag.accept_stat, config.target_accept);
        if adapt.calls >= config.adapt_steps {
            adapt.freeze();
        }
    }
    (tree.proposal.q, diag)
}

/// Fixed step-size, fixed length HMC with a Metropolis correction.
/// Kept as a simple reference kernel for tests.
pub fn hmc_draw<T: Target + ?Sized, R: Rng + ?Sized>(
    current: &[f64],
    target: &T,
    step_size: f64,
    n_steps: usize,
    rng: &mut R,
) -> (Vec<f64>, bool) {
    let p0: Vec<f64> = (0..current.len()).map(|_| rng.sample(StandardNormal)).collect();
    let h0 = -target.log_density(current) + 0.5 * dot(&p0, &p0);
    let res = leapfrog(
        current,
        &p0,
        step_size,
        |x| {
            let mut g = vec![0.0; x.len()];
            target.gradient(x, &mut g);
            g
        },
        n_steps,
    );
    if res.divergent {
        return (current.to_vec(), false);
    }
    let h1 = -target.log_density(&res.position) + 0.5 * dot(&res.momentum, &res.momentum);
    let u: f64 = rng.random();
    if h1.is_finite() && u.ln() < h0 - h1 {
        (res.position, true)
    } else {
        (current.to_vec(), false)
    }
}

//! Forecast metrics, forecast comparison tests and MCMC efficiency
//! diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{BnnError, Result};
use crate::model::{ActivationKind, ChainOutput, Dataset};
use crate::sampler::PredictiveDraw;
use crate::stats::{self, log_sum_exp, normal_log_pdf, quantile_sorted, std_normal_cdf, std_normal_quantile};

/// Predictive draws for one hold-out period and the realised value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub draws: Vec<PredictiveDraw>,
    pub realized: f64,
    pub period: String,
}

/// Minimum number of draws for density metrics.
pub const MIN_DENSITY_DRAWS: usize = 100;

impl ForecastRecord {
    /// Point forecast: the average conditional mean over draws.
    pub fn point(&self) -> Result<f64> {
        if self.draws.is_empty() {
            return Err(BnnError::Argument(format!("period {} has no draws", self.period)));
        }
        Ok(self.draws.iter().map(|d| d.mean).sum::<f64>() / self.draws.len() as f64)
    }

    /// Empirical `tau` quantile of the predictive draws.
    pub fn quantile(&self, tau: f64) -> Result<f64> {
        if self.draws.is_empty() {
            return Err(BnnError::Argument(format!("period {} has no draws", self.period)));
        }
        let mut v: Vec<f64> = self.draws.iter().map(|d| d.draw).collect();
        v.sort_by(f64::total_cmp);
        Ok(quantile_sorted(&v, tau))
    }

    /// Log predictive likelihood of the realised value under the Gaussian
    /// mixture `(1/S) Σ_s N(mean_s, variance_s)`.
    pub fn log_score(&self) -> Result<f64> {
        if self.draws.is_empty() {
            return Err(BnnError::Argument(format!("period {} has no draws", self.period)));
        }
        let terms: Vec<f64> = self
            .draws
            .iter()
            .map(|d| normal_log_pdf(self.realized, d.mean, d.variance))
            .collect();
        Ok(log_sum_exp(&terms) - (self.draws.len() as f64).ln())
    }
}

fn nonempty(records: &[ForecastRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(BnnError::Argument("no forecast records".into()));
    }
    Ok(())
}

pub fn rmse(records: &[ForecastRecord]) -> Result<f64> {
    nonempty(records)?;
    let mut ss = 0.0;
    for r in records {
        let e = r.realized - r.point()?;
        ss += e * e;
    }
    Ok((ss / records.len() as f64).sqrt())
}

pub fn relative_rmse(model: &[ForecastRecord], benchmark: &[ForecastRecord]) -> Result<f64> {
    aligned(model, benchmark)?;
    Ok(rmse(model)? / rmse(benchmark)?)
}

/// Pinball loss `(y - q)(τ - 1{y < q})`.
pub fn pinball(y: f64, q: f64, tau: f64) -> f64 {
    let ind = if y < q { 1.0 } else { 0.0 };
    (y - q) * (tau - ind)
}

/// Average pinball loss over periods with the empirical `tau` quantile of
/// the predictive draws as the forecast.
pub fn quantile_score(records: &[ForecastRecord], tau: f64) -> Result<f64> {
    nonempty(records)?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(BnnError::Argument(format!("quantile level {tau} outside (0, 1)")));
    }
    let mut total = 0.0;
    for r in records {
        total += pinball(r.realized, r.quantile(tau)?, tau);
    }
    Ok(total / records.len() as f64)
}

pub fn relative_quantile_score(model: &[ForecastRecord], benchmark: &[ForecastRecord], tau: f64) -> Result<f64> {
    aligned(model, benchmark)?;
    Ok(quantile_score(model, tau)? / quantile_score(benchmark, tau)?)
}

/// Per-period log predictive likelihoods and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lpl {
    pub per_period: Vec<f64>,
    pub total: f64,
}

pub fn lpl(records: &[ForecastRecord]) -> Result<Lpl> {
    nonempty(records)?;
    let per_period = records.iter().map(ForecastRecord::log_score).collect::<Result<Vec<_>>>()?;
    let total = per_period.iter().sum();
    Ok(Lpl { per_period, total })
}

/// Checks two record sets cover the same periods with the same outcomes.
pub fn aligned(a: &[ForecastRecord], b: &[ForecastRecord]) -> Result<()> {
    if a.len() != b.len() {
        return Err(BnnError::Dimension(format!("{} vs {} forecast periods", a.len(), b.len())));
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x.period != y.period || x.realized != y.realized {
            return Err(BnnError::InvalidData(format!(
                "record {i} misaligned: period {} / {}, realised {} / {}",
                x.period, y.period, x.realized, y.realized
            )));
        }
    }
    Ok(())
}

/// Activation frequencies per neuron and averaged over neurons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pip {
    /// One row per neuron, columns in [`ActivationKind::ALL`] order.
    pub per_neuron: Vec<[f64; 4]>,
    pub average: [f64; 4],
}

pub fn pip(chain: &ChainOutput) -> Result<Pip> {
    if chain.is_empty() {
        return Err(BnnError::InsufficientDraws { needed: 1, got: 0 });
    }
    let q = chain.draws[0].n_neurons();
    let mut counts = vec![[0usize; 4]; q];
    for d in &chain.draws {
        for (c, kind) in counts.iter_mut().zip(&d.delta) {
            c[kind.index()] += 1;
        }
    }
    let s = chain.len() as f64;
    let per_neuron: Vec<[f64; 4]> = counts.iter().map(|c| c.map(|n| n as f64 / s)).collect();
    let mut average = [0.0; 4];
    if q > 0 {
        for row in &per_neuron {
            for m in 0..4 {
                average[m] += row[m] / q as f64;
            }
        }
    }
    Ok(Pip { per_neuron, average })
}

impl Pip {
    pub fn probability(&self, kind: ActivationKind) -> f64 {
        self.average[kind.index()]
    }
}

/// Share of the variance of `y` explained by the posterior-mean conditional
/// mean: `1 - Var(y - fit) / Var(y)`.
pub fn insample_r2(chain: &ChainOutput, data: &Dataset) -> Result<f64> {
    if chain.is_empty() {
        return Err(BnnError::InsufficientDraws { needed: 1, got: 0 });
    }
    let vy = stats::variance(&data.y);
    if !(vy > 0.0) {
        return Err(BnnError::Argument("response has zero variance".into()));
    }
    let fit = chain.posterior_mean_fit(&data.x);
    let resid: Vec<f64> = data.y.iter().zip(&fit).map(|(y, f)| y - f).collect();
    Ok(1.0 - stats::variance(&resid) / vy)
}

pub fn relative_r2(model: f64, benchmark: f64) -> Result<f64> {
    if benchmark == 0.0 {
        return Err(BnnError::Undefined("benchmark R2 is zero".into()));
    }
    Ok(model / benchmark)
}

/// Autocovariances at lags `0..=max_lag` with divisor `n`.
fn autocovariances(v: &[f64], max_lag: usize) -> Vec<f64> {
    let n = v.len();
    let m = stats::mean(v);
    let c: Vec<f64> = v.iter().map(|x| x - m).collect();
    (0..=max_lag.min(n - 1))
        .map(|l| c[..n - l].iter().zip(&c[l..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect()
}

/// Long-run variance with Bartlett weights `1 - l / (lags + 1)`.
pub fn bartlett_lrv(v: &[f64], lags: usize) -> f64 {
    let g = autocovariances(v, lags);
    let mut lrv = g[0];
    for (l, gl) in g.iter().enumerate().skip(1) {
        lrv += 2.0 * (1.0 - l as f64 / (lags as f64 + 1.0)) * gl;
    }
    lrv
}

/// Significance stars for a p-value: `***` 1%, `**` 5%, `*` 10%.
pub fn stars(p_value: f64) -> &'static str {
    if p_value < 0.01 {
        "***"
    } else if p_value < 0.05 {
        "**"
    } else if p_value < 0.1 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    pub p_value: f64,
}

impl DmResult {
    pub fn stars(&self) -> &'static str {
        stars(self.p_value)
    }
}

/// Diebold–Mariano test of equal expected loss. Positive statistics mean
/// `loss_a` is larger on average. The long-run variance uses `h - 1`
/// Bartlett lags and the p-value is two-sided under the normal limit.
pub fn dm_test(loss_a: &[f64], loss_b: &[f64], h: usize) -> Result<DmResult> {
    if loss_a.len() != loss_b.len() {
        return Err(BnnError::Dimension(format!(
            "loss series have lengths {} and {}",
            loss_a.len(),
            loss_b.len()
        )));
    }
    if loss_a.len() < 10 {
        return Err(BnnError::Argument(format!("need at least 10 losses, got {}", loss_a.len())));
    }
    if h == 0 {
        return Err(BnnError::Argument("horizon must be at least 1".into()));
    }
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let lrv = bartlett_lrv(&d, h - 1);
    if !(lrv > 0.0) || d.iter().all(|&x| x == d[0]) {
        return Err(BnnError::DegenerateTest("loss differential has zero long-run variance".into()));
    }
    let statistic = stats::mean(&d) / (lrv / n).sqrt();
    let p_value = 2.0 * (1.0 - std_normal_cdf(statistic.abs()));
    Ok(DmResult { statistic, p_value })
}

/// Two-sided 5% critical values of the fluctuation test by window share.
const FLUCTUATION_CV: [(f64, f64); 9] = [
    (0.1, 3.393),
    (0.2, 3.179),
    (0.3, 3.012),
    (0.4, 2.890),
    (0.5, 2.779),
    (0.6, 2.634),
    (0.7, 2.560),
    (0.8, 2.433),
    (0.9, 2.248),
];

/// Critical value for window share `frac`, linearly interpolated and held
/// constant outside the tabulated range.
pub fn fluctuation_critical_value(frac: f64) -> f64 {
    let first = FLUCTUATION_CV[0];
    let last = FLUCTUATION_CV[FLUCTUATION_CV.len() - 1];
    if frac <= first.0 {
        return first.1;
    }
    if frac >= last.0 {
        return last.1;
    }
    for w in FLUCTUATION_CV.windows(2) {
        let (a, b) = (w[0], w[1]);
        if frac <= b.0 {
            return a.1 + (frac - a.0) / (b.0 - a.0) * (b.1 - a.1);
        }
    }
    last.1
}

/// Newey–West lag choice `floor(4 (n / 100)^{2/9})`.
pub fn newey_west_lags(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationResult {
    /// Standardised rolling means, one per window position.
    pub statistics: Vec<f64>,
    /// Index of the observation each window is centred on.
    pub centers: Vec<usize>,
    pub window: usize,
    pub critical_value: f64,
}

impl FluctuationResult {
    /// True when some statistic leaves `(-cv, cv)`.
    pub fn rejects(&self) -> bool {
        self.statistics.iter().any(|s| s.abs() > self.critical_value)
    }
}

/// Rolling-window test of equal performance over time on a loss (or score)
/// differential. Each statistic is `sqrt(m) · mean(window) / σ̂` with `m` the
/// window length and `σ̂²` the full-sample Bartlett long-run variance.
pub fn fluctuation_test(diff: &[f64], window_frac: f64) -> Result<FluctuationResult> {
    if !(window_frac > 0.0 && window_frac < 1.0) {
        return Err(BnnError::Argument(format!("window fraction {window_frac} outside (0, 1)")));
    }
    let n = diff.len();
    let m = (window_frac * n as f64).round() as usize;
    if m < 10 {
        return Err(BnnError::Argument(format!(
            "window of {m} observations is too short (series length {n})"
        )));
    }
    let lrv = bartlett_lrv(diff, newey_west_lags(n));
    if !(lrv > 0.0) {
        return Err(BnnError::DegenerateTest("differential has zero long-run variance".into()));
    }
    let sd = lrv.sqrt();
    let mut sum: f64 = diff[..m].iter().sum();
    let mut statistics = Vec::with_capacity(n - m + 1);
    let mut centers = Vec::with_capacity(n - m + 1);
    for start in 0..=(n - m) {
        if start > 0 {
            sum += diff[start + m - 1] - diff[start - 1];
        }
        statistics.push(sum / (m as f64).sqrt() / sd);
        centers.push(start + m / 2);
    }
    Ok(FluctuationResult {
        statistics,
        centers,
        window: m,
        critical_value: fluctuation_critical_value(m as f64 / n as f64),
    })
}

pub const MIN_TRACE: usize = 100;

fn check_trace(trace: &[f64]) -> Result<()> {
    if trace.len() < MIN_TRACE {
        return Err(BnnError::InsufficientDraws {
            needed: MIN_TRACE,
            got: trace.len(),
        });
    }
    if trace.iter().any(|v| !v.is_finite()) {
        return Err(BnnError::InvalidData("trace contains non-finite values".into()));
    }
    Ok(())
}

/// Chain length over effective sample size, with the integrated
/// autocorrelation time truncated by the initial monotone sequence rule.
pub fn inefficiency_factor(trace: &[f64]) -> Result<f64> {
    check_trace(trace)?;
    let n = trace.len();
    let m = stats::mean(trace);
    let c: Vec<f64> = trace.iter().map(|x| x - m).collect();
    let acov = |l: usize| c[..n - l].iter().zip(&c[l..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let g0 = acov(0);
    if !(g0 > 0.0) {
        return Err(BnnError::Undefined("constant trace".into()));
    }
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (acov(2 * k) + acov(2 * k + 1)) / g0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        k += 1;
    }
    Ok(tau)
}

/// Run-length diagnostic for estimating a quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RafteryLewis {
    /// Total draws needed, burn-in included.
    pub total: usize,
    pub burn: usize,
    /// Draws needed under independence.
    pub nmin: usize,
    pub thin: usize,
    /// `total / nmin`.
    pub dependence_factor: f64,
}

fn binary_thinned(z: &[bool], k: usize) -> Vec<bool> {
    z.iter().step_by(k).copied().collect()
}

/// BIC comparison of a second- against a first-order Markov chain;
/// negative values favour the first-order model.
fn second_order_bic(z: &[bool]) -> f64 {
    let mut n = [[[0.0f64; 2]; 2]; 2];
    for w in z.windows(3) {
        n[w[0] as usize][w[1] as usize][w[2] as usize] += 1.0;
    }
    let mut g2 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                if n[i][j][k] == 0.0 {
                    continue;
                }
                let nij: f64 = n[i][j][0] + n[i][j][1];
                let njk: f64 = n[0][j][k] + n[1][j][k];
                let nj: f64 = n[0][j][0] + n[0][j][1] + n[1][j][0] + n[1][j][1];
                let fitted = nij * njk / nj;
                g2 += 2.0 * n[i][j][k] * (n[i][j][k] / fitted).ln();
            }
        }
    }
    g2 - 2.0 * ((z.len() - 2) as f64).ln()
}

/// Raftery–Lewis run length to estimate the `q` quantile to within `±r`
/// with probability `s`.
pub fn raftery_lewis(trace: &[f64], q: f64, r: f64, s: f64) -> Result<RafteryLewis> {
    check_trace(trace)?;
    if !(q > 0.0 && q < 1.0 && r > 0.0 && s > 0.0 && s < 1.0) {
        return Err(BnnError::Argument(format!("invalid settings q={q}, r={r}, s={s}")));
    }
    let phi = std_normal_quantile((s + 1.0) / 2.0);
    let nmin = (q * (1.0 - q) * phi * phi / (r * r)).ceil() as usize;
    if trace.len() < nmin {
        return Err(BnnError::InsufficientDraws {
            needed: nmin,
            got: trace.len(),
        });
    }
    let cut = stats::quantile(trace, q);
    let z: Vec<bool> = trace.iter().map(|&v| v <= cut).collect();
    if z.iter().all(|&b| b) || z.iter().all(|&b| !b) {
        return Err(BnnError::Undefined("indicator chain never changes state".into()));
    }
    let mut thin = 1;
    loop {
        let zt = binary_thinned(&z, thin);
        if zt.len() < 3 || second_order_bic(&zt) < 0.0 {
            break;
        }
        thin += 1;
    }
    let zt = binary_thinned(&z, thin);
    let mut n = [[0.0f64; 2]; 2];
    for w in zt.windows(2) {
        n[w[0] as usize][w[1] as usize] += 1.0;
    }
    let alpha = n[0][1] / (n[0][0] + n[0][1]);
    let beta = n[1][0] / (n[1][0] + n[1][1]);
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(BnnError::Undefined("indicator chain has an absorbing state".into()));
    }
    const EPS: f64 = 0.001;
    let burn_thinned = ((EPS * (alpha + beta)) / alpha.max(beta)).ln() / (1.0 - alpha - beta).abs().ln();
    let burn = burn_thinned.ceil().max(0.0) as usize * thin;
    let keep_thinned = (2.0 - alpha - beta) * alpha * beta * phi * phi / ((alpha + beta).powi(3) * r * r);
    let keep = keep_thinned.ceil() as usize * thin;
    let total = burn + keep;
    Ok(RafteryLewis {
        total,
        burn,
        nmin,
        thin,
        dependence_factor: total as f64 / nmin as f64,
    })
}

/// Median and 10th / 90th percentiles of per-parameter diagnostics in one
/// parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagnostics {
    pub block: String,
    pub n_params: usize,
    pub if_median: f64,
    pub if_p10: f64,
    pub if_p90: f64,
    pub rl_median: f64,
    pub rl_p10: f64,
    pub rl_p90: f64,
}

/// Summarises inefficiency factors and Raftery–Lewis totals over the
/// traces of one block. Traces whose diagnostics are undefined (constant
/// draws) are skipped; an error is returned only if none remains.
pub fn block_diagnostics(block: &str, traces: &[Vec<f64>]) -> Result<BlockDiagnostics> {
    let mut ifs = Vec::new();
    let mut rls = Vec::new();
    for t in traces {
        match inefficiency_factor(t) {
            Ok(v) => ifs.push(v),
            Err(BnnError::Undefined(_)) => {}
            Err(e) => return Err(e),
        }
        match raftery_lewis(t, 0.025, 0.025, 0.95) {
            Ok(v) => rls.push(v.total as f64),
            Err(BnnError::Undefined(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if ifs.is_empty() || rls.is_empty() {
        return Err(BnnError::Undefined(format!("no usable traces in block {block}")));
    }
    Ok(BlockDiagnostics {
        block: block.to_string(),
        n_params: traces.len(),
        if_median: stats::median(&ifs),
        if_p10: stats::quantile(&ifs, 0.1),
        if_p90: stats::quantile(&ifs, 0.9),
        rl_median: stats::median(&rls),
        rl_p10: stats::quantile(&rls, 0.1),
        rl_p90: stats::quantile(&rls, 0.9),
    })
}

/// Diagnostics for the β, κ and ν blocks of a chain (β and κ only when the
/// chain has neurons).
pub fn chain_diagnostics(chain: &ChainOutput) -> Result<Vec<BlockDiagnostics>> {
    if chain.len() < MIN_TRACE {
        return Err(BnnError::InsufficientDraws {
            needed: MIN_TRACE,
            got: chain.len(),
        });
    }
    let first = &chain.draws[0];
    let q = first.n_neurons();
    let k = first.n_covariates();
    let t = first.sv.log_vol.len();
    let mut out = Vec::new();
    if q > 0 {
        let beta: Vec<Vec<f64>> = (0..q).map(|j| chain.draws.iter().map(|d| d.beta[j]).collect()).collect();
        out.push(block_diagnostics("beta", &beta)?);
        let kappa: Vec<Vec<f64>> = (0..k * q)
            .map(|i| chain.draws.iter().map(|d| d.kappa.as_slice()[i]).collect())
            .collect();
        out.push(block_diagnostics("kappa", &kappa)?);
    }
    let gamma: Vec<Vec<f64>> = (0..k).map(|j| chain.draws.iter().map(|d| d.gamma[j]).collect()).collect();
    out.push(block_diagnostics("gamma", &gamma)?);
    if !first.sv.homoskedastic {
        let nu: Vec<Vec<f64>> = (0..t).map(|i| chain.draws.iter().map(|d| d.sv.log_vol[i]).collect()).collect();
        out.push(block_diagnostics("nu", &nu)?);
    }
    Ok(out)
}

/// One line of tidy metric output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub dataset: String,
    pub metric: String,
    pub value: f64,
}

impl MetricRow {
    pub fn new(model: &str, dataset: &str, metric: &str, value: f64) -> Self {
        Self {
            model: model.into(),
            dataset: dataset.into(),
            metric: metric.into(),
            value,
        }
    }
}

/// RMSE, quantile scores at 0.25 / 0.75 and the cumulative LPL of one
/// model's forecasts.
pub fn standard_metrics(model: &str, dataset: &str, records: &[ForecastRecord]) -> Result<Vec<MetricRow>> {
    Ok(vec![
        MetricRow::new(model, dataset, "rmse", rmse(records)?),
        MetricRow::new(model, dataset, "qs25", quantile_score(records, 0.25)?),
        MetricRow::new(model, dataset, "qs75", quantile_score(records, 0.75)?),
        MetricRow::new(model, dataset, "lpl", lpl(records)?.total),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn record(means: &[f64], variance: f64, realized: f64, period: &str) -> ForecastRecord {
        ForecastRecord {
            draws: means
                .iter()
                .map(|&m| PredictiveDraw {
                    mean: m,
                    variance,
                    draw: m,
                })
                .collect(),
            realized,
            period: period.into(),
        }
    }

    #[test]
    fn rmse_basics() {
        assert_eq!(rmse(&[record(&[1.0], 1.0, 1.0, "a")]).unwrap(), 0.0);
        let r = [record(&[0.0], 1.0, 1.0, "a"), record(&[0.0], 1.0, -1.0, "b")];
        assert_eq!(rmse(&r).unwrap(), 1.0);
        assert_eq!(relative_rmse(&r, &r).unwrap(), 1.0);
        assert!(matches!(rmse(&[]), Err(BnnError::Argument(_))));
    }

    #[test]
    fn pinball_examples() {
        assert_eq!(pinball(1.0, 0.0, 0.25), 0.25);
        assert_eq!(pinball(-1.0, 0.0, 0.75), 0.25);
        assert_eq!(quantile_score(&[record(&[2.0], 1.0, 2.0, "a")], 0.3).unwrap(), 0.0);
        let empty = ForecastRecord {
            draws: vec![],
            realized: 0.0,
            period: "x".into(),
        };
        assert!(quantile_score(&[empty], 0.5).is_err());
    }

    #[test]
    fn median_score_is_half_absolute_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let recs: Vec<ForecastRecord> = (0..30)
            .map(|i| {
                let means: Vec<f64> = (0..101).map(|_| rng.sample(StandardNormal)).collect();
                record(&means, 1.0, rng.sample(StandardNormal), &i.to_string())
            })
            .collect();
        let qs = quantile_score(&recs, 0.5).unwrap();
        let mad: f64 = recs
            .iter()
            .map(|r| (r.realized - r.quantile(0.5).unwrap()).abs())
            .sum::<f64>()
            / 30.0;
        assert!((qs - 0.5 * mad).abs() < 1e-12);
    }

    #[test]
    fn lpl_analytic_values() {
        let r = record(&[0.0], 1.0, 0.0, "a");
        assert!((lpl(&[r]).unwrap().total + 0.918_938_533_204_672_7).abs() < 1e-12);
        let two = record(&[0.0, 0.0], 1.0, 0.0, "a");
        assert!((two.log_score().unwrap() + 0.918_938_533_204_672_7).abs() < 1e-12);
        let tail = record(&[0.0], 1.0, 10.0, "a").log_score().unwrap();
        assert!((tail - (-50.0 - 0.918_938_533_204_672_7)).abs() < 1e-9);
        let far = record(&[0.0, 1.0], 1e-6, 1e3, "a").log_score().unwrap();
        assert!(far.is_finite());
    }

    #[test]
    fn metrics_ignore_draw_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let means: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
        let r = ForecastRecord {
            draws: means
                .iter()
                .map(|&m| PredictiveDraw {
                    mean: m,
                    variance: 0.5 + m.abs(),
                    draw: m + rng.sample::<f64, _>(StandardNormal),
                })
                .collect(),
            realized: 0.3,
            period: "p".into(),
        };
        let mut shuffled = r.clone();
        shuffled.draws.reverse();
        shuffled.draws.swap(3, 150);
        let a = [r];
        let b = [shuffled];
        assert!((rmse(&a).unwrap() - rmse(&b).unwrap()).abs() < 1e-12);
        assert!((quantile_score(&a, 0.25).unwrap() - quantile_score(&b, 0.25).unwrap()).abs() < 1e-12);
        assert!((lpl(&a).unwrap().total - lpl(&b).unwrap().total).abs() < 1e-12);
    }

    #[test]
    fn misaligned_records_rejected() {
        let a = [record(&[0.0], 1.0, 1.0, "a")];
        let b = [record(&[0.0], 1.0, 2.0, "a")];
        assert!(relative_rmse(&a, &b).is_err());
        assert!(relative_rmse(&a, &[]).is_err());
    }

    #[test]
    fn dm_examples() {
        let a: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let zero = vec![0.0; 100];
        let r = dm_test(&a, &zero, 1).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert!(matches!(dm_test(&zero, &zero, 1), Err(BnnError::DegenerateTest(_))));
        assert!(dm_test(&a[..5], &zero[..5], 1).is_err());
    }

    #[test]
    fn dm_statistic_matches_clt() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1000;
        let a: Vec<f64> = (0..n).map(|_| 0.5 + rng.sample::<f64, _>(StandardNormal)).collect();
        let r = dm_test(&a, &vec![0.0; n], 1).unwrap();
        assert!((r.statistic - 15.8).abs() < 1.5, "{}", r.statistic);
        assert_eq!(r.stars(), "***");
    }

    #[test]
    fn fluctuation_keeps_sign_and_tracks_breaks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pos: Vec<f64> = (0..200).map(|_| 3.0 + rng.sample::<f64, _>(StandardNormal)).collect();
        let f = fluctuation_test(&pos, 0.3).unwrap();
        assert_eq!(f.window, 60);
        assert!(f.statistics.iter().all(|&s| s > 0.0));
        let flip: Vec<f64> = (0..200)
            .map(|i| if i < 100 { 2.0 } else { -2.0 } + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let f = fluctuation_test(&flip, 0.3).unwrap();
        let cross = f.statistics.windows(2).position(|w| w[0] > 0.0 && w[1] <= 0.0).unwrap();
        assert!((f.centers[cross] as i64 - 100).abs() <= 5);
        assert!(fluctuation_test(&pos[..20], 0.3).is_err());
    }

    #[test]
    fn critical_values_interpolate() {
        assert_eq!(fluctuation_critical_value(0.3), 3.012);
        assert!((fluctuation_critical_value(0.35) - 0.5 * (3.012 + 2.890)).abs() < 1e-12);
        assert_eq!(fluctuation_critical_value(0.05), 3.393);
    }

    #[test]
    fn iid_and_ar1_inefficiency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let iid: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let f = inefficiency_factor(&iid).unwrap();
        assert!((0.8..=1.3).contains(&f), "{f}");
        let mut x = 0.0;
        let ar: Vec<f64> = (0..100_000)
            .map(|_| {
                x = 0.9 * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let f = inefficiency_factor(&ar).unwrap();
        assert!((f / 19.0 - 1.0).abs() < 0.3, "{f}");
        assert!(matches!(inefficiency_factor(&[1.0; 200]), Err(BnnError::Undefined(_))));
        assert!(matches!(inefficiency_factor(&[1.0; 50]), Err(BnnError::InsufficientDraws { .. })));
    }

    #[test]
    fn raftery_lewis_independent_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let iid: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let rl = raftery_lewis(&iid, 0.025, 0.025, 0.95).unwrap();
        assert_eq!(rl.nmin, 150);
        assert_eq!(rl.thin, 1);
        assert!((120..=200).contains(&rl.total), "{rl:?}");
        let mut x = 0.0;
        let ar: Vec<f64> = (0..10_000)
            .map(|_| {
                x = 0.95 * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let slow = raftery_lewis(&ar, 0.025, 0.025, 0.95).unwrap();
        assert!(slow.total > 2 * rl.total, "{slow:?}");
    }

    #[test]
    fn relative_r2_of_identical_models() {
        assert_eq!(relative_r2(0.4, 0.4).unwrap(), 1.0);
        assert!(relative_r2(0.4, 0.0).is_err());
    }
}

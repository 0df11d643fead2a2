//! Recursive out-of-sample forecasting and the per-period summaries built
//! from it: activation PIPs, active-neuron counts and in-sample fit versus
//! predictive performance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BnnError, Result};
use crate::evaluation::{insample_r2, pip, ForecastRecord, Pip};
use crate::model::{ChainOutput, Dataset, NetworkState, SamplerConfig};
use crate::sampler::{predict, run_chain_from};
use crate::shrinkage::{active_neurons_ci, MIN_CI_DRAWS};

/// Anything that can produce a posterior chain from a training sample.
pub trait Fitter: Sync {
    fn fit(&self, train: &Dataset, init: Option<&NetworkState>, rng: &mut ChaCha8Rng) -> Result<ChainOutput>;
}

impl Fitter for SamplerConfig {
    fn fit(&self, train: &Dataset, init: Option<&NetworkState>, rng: &mut ChaCha8Rng) -> Result<ChainOutput> {
        run_chain_from(train, self, init, rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursiveOptions {
    /// First forecast row (zero based); the first fit uses rows `0..start_index`.
    pub start_index: usize,
    /// Smallest training sample accepted.
    pub min_train: usize,
    /// Start each period's chain from the previous period's final state.
    pub warm_start: bool,
    /// Keep each period's full chain in the output.
    pub keep_chains: bool,
    pub seed: u64,
}

impl Default for RecursiveOptions {
    fn default() -> Self {
        Self {
            start_index: 40,
            min_train: 40,
            warm_start: false,
            keep_chains: false,
            seed: 42,
        }
    }
}

/// Output of one recursive period.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodFit {
    pub record: ForecastRecord,
    /// In-sample R2 on the period's training rows.
    pub insample_r2: f64,
    pub pip: Pip,
    /// Neurons whose 5–95% interval of β excludes zero; `None` without
    /// neurons or with too few draws.
    pub active_neurons: Option<usize>,
    pub chain: Option<ChainOutput>,
}

/// Random stream for period `t` derived from `seed`.
pub fn period_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64 + 1);
    rng
}

fn fit_period<F: Fitter + ?Sized>(
    data: &Dataset,
    fitter: &F,
    t: usize,
    init: Option<&NetworkState>,
    options: &RecursiveOptions,
) -> Result<(PeriodFit, NetworkState)> {
    let mut rng = period_rng(options.seed, t);
    let train = data.head(t)?;
    let chain = fitter.fit(&train, init, &mut rng)?;
    let x_new = data.row(t);
    let draws = predict(&chain, &x_new, 1, &mut rng)?;
    let record = ForecastRecord {
        draws,
        realized: data.y[t],
        period: data.label(t),
    };
    let r2 = insample_r2(&chain, &train).unwrap_or(f64::NAN);
    let beta = chain.beta_draws();
    let active_neurons = if beta.ncols() > 0 && beta.nrows() >= MIN_CI_DRAWS {
        Some(active_neurons_ci(&beta)?)
    } else {
        None
    };
    let fit = PeriodFit {
        record,
        insample_r2: r2,
        pip: pip(&chain)?,
        active_neurons,
        chain: None,
    };
    let last = chain.final_state.clone();
    let fit = if options.keep_chains {
        PeriodFit {
            chain: Some(chain),
            ..fit
        }
    } else {
        fit
    };
    Ok((fit, last))
}

/// Expanding-window forecasts: for each `t` in `start_index..T`, fit on rows
/// `0..t` and forecast row `t`. Cold-start periods run in parallel, each
/// with its own random stream; warm-start periods run in order.
pub fn recursive_forecast<F: Fitter + ?Sized>(
    data: &Dataset,
    fitter: &F,
    options: &RecursiveOptions,
) -> Result<Vec<PeriodFit>> {
    let t_total = data.len();
    if options.start_index < options.min_train.max(2) {
        return Err(BnnError::Argument(format!(
            "start index {} below the minimum training length {}",
            options.start_index,
            options.min_train.max(2)
        )));
    }
    if options.start_index >= t_total {
        return Err(BnnError::Argument(format!(
            "start index {} leaves no period to forecast (T = {t_total})",
            options.start_index
        )));
    }
    let periods: Vec<usize> = (options.start_index..t_total).collect();
    let attach = |t: usize| {
        let period = data.label(t);
        move |e: BnnError| BnnError::Period {
            period,
            source: Box::new(e),
        }
    };
    if options.warm_start {
        let mut out = Vec::with_capacity(periods.len());
        let mut prev: Option<NetworkState> = None;
        for &t in &periods {
            let (fit, last) = fit_period(data, fitter, t, prev.as_ref(), options).map_err(attach(t))?;
            prev = Some(last);
            out.push(fit);
        }
        Ok(out)
    } else {
        periods
            .par_iter()
            .map(|&t| fit_period(data, fitter, t, None, options).map(|p| p.0).map_err(attach(t)))
            .collect()
    }
}

/// Neuron-averaged activation PIPs, one row per chain.
pub fn pip_over_time(chains: &[ChainOutput]) -> Result<Vec<[f64; 4]>> {
    chains.iter().map(|c| pip(c).map(|p| p.average)).collect()
}

/// Active-neuron counts by the credible-interval rule, one per chain.
pub fn qstar_over_time(chains: &[ChainOutput]) -> Result<Vec<usize>> {
    chains.iter().map(|c| active_neurons_ci(&c.beta_draws())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub period: String,
    /// Model in-sample R2 over benchmark in-sample R2.
    pub relative_r2: f64,
    /// Model log score minus benchmark log score.
    pub relative_lpl: f64,
}

/// Pairs each period's relative in-sample fit with its relative log
/// predictive likelihood.
pub fn r2_lpl_scatter(model: &[PeriodFit], benchmark: &[PeriodFit]) -> Result<Vec<ScatterPoint>> {
    if model.len() != benchmark.len() {
        return Err(BnnError::Dimension(format!(
            "{} model periods vs {} benchmark periods",
            model.len(),
            benchmark.len()
        )));
    }
    model
        .iter()
        .zip(benchmark)
        .map(|(m, b)| {
            if m.record.period != b.record.period {
                return Err(BnnError::InvalidData(format!(
                    "period labels differ: {} vs {}",
                    m.record.period, b.record.period
                )));
            }
            Ok(ScatterPoint {
                period: m.record.period.clone(),
                relative_r2: m.insample_r2 / b.insample_r2,
                relative_lpl: m.record.log_score()? - b.record.log_score()?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ActivationKind;
    use crate::sampler::run_chain;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn data(t: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(t, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = (0..t)
            .map(|i| 0.8 * x[(i, 0)] + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Dataset::new(y, x).unwrap()
    }

    fn quick() -> SamplerConfig {
        SamplerConfig {
            n_draws: 150,
            n_burn: 50,
            linear_only: true,
            ..Default::default()
        }
    }

    #[test]
    fn one_record_per_forecast_period() {
        let d = data(60);
        let opts = RecursiveOptions {
            start_index: 50,
            ..Default::default()
        };
        let out = recursive_forecast(&d, &quick(), &opts).unwrap();
        assert_eq!(out.len(), 10);
        assert_eq!(out[0].record.period, "50");
        assert_eq!(out[9].record.realized, d.y[59]);
        assert!(out.iter().all(|p| p.record.draws.len() == 100));
    }

    #[test]
    fn start_index_is_validated() {
        let d = data(60);
        let early = RecursiveOptions {
            start_index: 10,
            ..Default::default()
        };
        assert!(matches!(recursive_forecast(&d, &quick(), &early), Err(BnnError::Argument(_))));
        let late = RecursiveOptions {
            start_index: 60,
            ..Default::default()
        };
        assert!(recursive_forecast(&d, &quick(), &late).is_err());
    }

    #[test]
    fn constant_activation_gives_constant_pip_rows() {
        let d = data(40);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = SamplerConfig {
            n_draws: 60,
            n_burn: 20,
            ..Default::default()
        };
        let mut chain = run_chain(&d, &cfg, &mut rng).unwrap();
        for s in &mut chain.draws {
            s.delta.iter_mut().for_each(|k| *k = ActivationKind::Sigmoid);
        }
        let rows = pip_over_time(&[chain.clone(), chain]).unwrap();
        assert_eq!(rows[0], [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(rows[0], rows[1]);
    }

    #[test]
    fn identical_models_sit_at_unit_r2_and_zero_lpl() {
        let d = data(50);
        let opts = RecursiveOptions {
            start_index: 45,
            ..Default::default()
        };
        let fits = recursive_forecast(&d, &quick(), &opts).unwrap();
        let pts = r2_lpl_scatter(&fits, &fits).unwrap();
        assert_eq!(pts.len(), 5);
        assert!(pts.iter().all(|p| p.relative_r2 == 1.0 && p.relative_lpl == 0.0));
    }
}

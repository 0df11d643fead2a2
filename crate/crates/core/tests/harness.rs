//! Recursive forecasting harness and the per-period summaries.

use std::sync::Mutex;

use bnn_core::activation::act_eval;
use bnn_core::model::ChainOutput;
use bnn_core::report::{pip_over_time, r2_lpl_scatter, recursive_forecast, Fitter, RecursiveOptions};
use bnn_core::sampler::run_chain_from;
use bnn_core::{ActivationKind, Dataset, NetworkState, Result, SamplerConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn dataset(t: usize, k: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(t, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = (0..t)
        .map(|i| {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            f(&row) + 0.3 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Dataset::new(y, x).unwrap()
}

fn nonlinear(x: &[f64]) -> f64 {
    2.0 * x[0].tanh() + 1.5 * x[1].max(0.0) - 0.3 * x[2]
}

fn small(n_draws: usize, n_burn: usize) -> SamplerConfig {
    SamplerConfig {
        n_draws,
        n_burn,
        sv_rho_fixed: Some(0.0),
        ..Default::default()
    }
}

/// Records the rows each fit sees.
struct Spy {
    inner: SamplerConfig,
    seen: Mutex<Vec<(usize, usize)>>,
}

impl Fitter for Spy {
    fn fit(&self, train: &Dataset, init: Option<&NetworkState>, rng: &mut ChaCha8Rng) -> Result<ChainOutput> {
        let max_row = *train.row_ids.iter().max().unwrap();
        self.seen.lock().unwrap().push((train.len(), max_row));
        run_chain_from(train, &self.inner, init, rng)
    }
}

#[test]
fn fits_never_see_the_forecast_row() {
    let data = dataset(30, 2, 1, |x| x[0]);
    let spy = Spy {
        inner: SamplerConfig {
            linear_only: true,
            ..small(120, 40)
        },
        seen: Mutex::new(Vec::new()),
    };
    let opts = RecursiveOptions {
        start_index: 20,
        min_train: 10,
        ..Default::default()
    };
    let out = recursive_forecast(&data, &spy, &opts).unwrap();
    let mut seen = spy.seen.into_inner().unwrap();
    seen.sort();
    let expected: Vec<(usize, usize)> = (20..30).map(|t| (t, t - 1)).collect();
    assert_eq!(seen, expected);
    for (i, p) in out.iter().enumerate() {
        assert_eq!(p.record.realized, data.y[20 + i]);
    }
}

#[test]
fn warm_start_matches_cold_start() {
    let data = dataset(60, 3, 2, nonlinear);
    let cfg = SamplerConfig {
        neurons: Some(3),
        ..small(2500, 1000)
    };
    let run = |warm: bool, seed: u64| {
        let opts = RecursiveOptions {
            start_index: 50,
            warm_start: warm,
            seed,
            ..Default::default()
        };
        recursive_forecast(&data, &cfg, &opts)
            .unwrap()
            .iter()
            .map(|p| p.record.log_score().unwrap())
            .collect::<Vec<f64>>()
    };
    let cold = run(false, 1);
    let cold2 = run(false, 2);
    let warm = run(true, 1);
    let avg_gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
    // Two cold runs with different seeds set the Monte Carlo yardstick.
    let noise = avg_gap(&cold, &cold2);
    let gap = avg_gap(&warm, &cold);
    assert!(gap < 3.0 * noise.max(0.02), "warm {gap:.4} vs cold-cold {noise:.4}");
}

#[test]
fn sigmoid_column_dominates_on_sigmoid_data() {
    let f = |x: &[f64]| 2.0 * act_eval(ActivationKind::Sigmoid, 1.5 * x[0] - x[1]);
    let data = dataset(200, 5, 3, f);
    // With one neuron the neuron average is that neuron's PIP.
    let cfg = SamplerConfig {
        neurons: Some(1),
        ..small(1500, 500)
    };
    let chains: Vec<ChainOutput> = [160, 180, 200]
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut rng = ChaCha8Rng::seed_from_u64(10 + i as u64);
            run_chain_from(&data.head(n).unwrap(), &cfg, None, &mut rng).unwrap()
        })
        .collect();
    let rows = pip_over_time(&chains).unwrap();
    for r in &rows {
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let avg = rows.iter().map(|r| r[ActivationKind::Sigmoid.index()]).sum::<f64>() / rows.len() as f64;
    assert!(avg > 0.5, "{rows:?}");
}

#[test]
fn nonlinear_data_favours_the_network_in_sample() {
    let data = dataset(70, 3, 4, nonlinear);
    let opts = RecursiveOptions {
        start_index: 60,
        ..Default::default()
    };
    let nn = recursive_forecast(&data, &small(1200, 400), &opts).unwrap();
    let lin = SamplerConfig {
        linear_only: true,
        ..small(1200, 400)
    };
    let bench = recursive_forecast(&data, &lin, &opts).unwrap();
    let pts = r2_lpl_scatter(&nn, &bench).unwrap();
    assert_eq!(pts.len(), 10);
    let above = pts.iter().filter(|p| p.relative_r2 > 1.0).count();
    assert!(above > 5, "{above}/10");
}

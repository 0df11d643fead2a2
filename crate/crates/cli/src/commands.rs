use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use bnn_core::evaluation::{
    aligned, chain_diagnostics, dm_test, fluctuation_test, standard_metrics, ForecastRecord, MetricRow,
};
use bnn_core::model::ChainOutput;
use bnn_core::replication::{format_table2, run_grid, table2_grid, ReplicationConfig};
use bnn_core::report::{r2_lpl_scatter, recursive_forecast, PeriodFit, RecursiveOptions};
use bnn_core::sampler::{predict, run_chain, PredictiveDraw};
use bnn_core::simulation::{generate, split};
use bnn_core::stats::{mean, quantile, variance};
use bnn_core::ActivationKind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::archive::{read_chain, write_chain, ArchiveFormat};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{fmt, read_covariates, read_dataset, read_realized, read_table, write_dataset, write_rows};
use crate::manifest::Manifest;

const SUMMARY_QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

fn out_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn simulate(config: &RunConfig, out: &Path) -> CliResult<()> {
    let dgp = &config.dgp;
    dgp.validate()?;
    out_dir(out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(dgp.seed);
    let (data, truth) = generate(dgp, &mut rng)?;
    let (train, holdout) = split(&data, &truth, dgp, &mut rng)?;
    write_dataset(&out.join("train.csv"), &train, true)?;
    write_dataset(&out.join("holdout.csv"), &holdout, true)?;
    let truth_path = out.join("truth.json");
    let mut value = serde_json::to_value(&truth).expect("truth serializes");
    value["active_neurons"] = serde_json::json!(truth.active_neurons());
    let text = serde_json::to_string_pretty(&value).expect("truth serializes");
    fs::write(&truth_path, text + "\n").map_err(|e| CliError::write(&truth_path, e))?;

    let mut m = Manifest::new("simulate", config, dgp.seed);
    for f in ["train.csv", "holdout.csv", "truth.json"] {
        m.output(f);
    }
    m.write(out)
}

fn write_diagnostics(path: &Path, chain: &ChainOutput) -> CliResult<()> {
    let rows = chain_diagnostics(chain)?;
    write_rows(
        path,
        &header(&["block", "n_params", "if_median", "if_p10", "if_p90", "rl_median", "rl_p10", "rl_p90"]),
        rows.iter().map(|b| {
            vec![
                b.block.clone(),
                b.n_params.to_string(),
                fmt(b.if_median),
                fmt(b.if_p10),
                fmt(b.if_p90),
                fmt(b.rl_median),
                fmt(b.rl_p10),
                fmt(b.rl_p90),
            ]
        }),
    )
}

pub fn fit(config: &RunConfig, data_path: &Path, out: &Path, format: ArchiveFormat) -> CliResult<()> {
    config.sampler.validate()?;
    let data = read_dataset(data_path)?;
    out_dir(out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.sampler.seed);
    let chain = run_chain(&data, &config.sampler, &mut rng)?;
    write_chain(&out.join("chain"), &chain, format)?;
    write_diagnostics(&out.join("diagnostics.csv"), &chain)?;
    let acceptance = out.join("acceptance.csv");
    write_rows(
        &acceptance,
        &header(&[
            "neuron",
            "hmc_calls",
            "prior_draws",
            "divergences",
            "mean_accept_stat",
            "mean_tree_depth",
            "step_size",
        ]),
        chain.acceptance.iter().enumerate().map(|(q, a)| {
            vec![
                (q + 1).to_string(),
                a.hmc_calls.to_string(),
                a.prior_draws.to_string(),
                a.divergences.to_string(),
                fmt(a.mean_accept_stat),
                fmt(a.mean_tree_depth),
                fmt(a.step_size),
            ]
        }),
    )?;
    let mut m = Manifest::new("fit", config, config.sampler.seed);
    m.input(data_path)?;
    for f in ["chain/", "diagnostics.csv", "acceptance.csv"] {
        m.output(f);
    }
    m.write(out)
}

pub fn diagnose(chain_dir: &Path, out: &Path) -> CliResult<()> {
    let chain = read_chain(chain_dir)?;
    write_diagnostics(out, &chain)
}

/// Covariate rows of an x-new file. A leading `y` column (as in the data
/// files) is dropped.
fn forecast_rows(path: &Path, k: usize) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let table = read_table(path)?;
    let table = if table.columns.len() == k + 1 && table.columns[0] == "y" {
        crate::io::Table {
            columns: table.columns[1..].to_vec(),
            rows: table.rows.into_iter().map(|r| r[1..].to_vec()).collect(),
            labels: table.labels,
        }
    } else {
        read_covariates(path, k)?
    };
    let labels = table
        .labels
        .unwrap_or_else(|| (0..table.rows.len()).map(|i| i.to_string()).collect());
    Ok((labels, table.rows))
}

pub fn forecast(chain_dir: &Path, x_path: &Path, horizon: usize, seed: u64, out: &Path) -> CliResult<()> {
    let chain = read_chain(chain_dir)?;
    let k = chain
        .draws
        .first()
        .map(|d| d.n_covariates())
        .ok_or_else(|| CliError::Data("chain archive has no draws".into()))?;
    let (labels, rows) = forecast_rows(x_path, k)?;
    out_dir(out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Vec<PredictiveDraw>> = rows
        .iter()
        .map(|x| predict(&chain, x, horizon, &mut rng))
        .collect::<bnn_core::Result<_>>()?;

    write_rows(
        &out.join("draws.csv"),
        &header(&["row", "draw", "mean", "variance", "value"]),
        labels.iter().zip(&draws).flat_map(|(l, d)| {
            d.iter()
                .enumerate()
                .map(move |(s, p)| vec![l.clone(), s.to_string(), fmt(p.mean), fmt(p.variance), fmt(p.draw)])
        }),
    )?;
    write_rows(
        &out.join("summary.csv"),
        &header(&["row", "mean", "sd", "q05", "q25", "q50", "q75", "q95"]),
        labels.iter().zip(&draws).map(|(l, d)| {
            let values: Vec<f64> = d.iter().map(|p| p.draw).collect();
            let means: Vec<f64> = d.iter().map(|p| p.mean).collect();
            let mut r = vec![l.clone(), fmt(mean(&means)), fmt(variance(&values).sqrt())];
            r.extend(SUMMARY_QUANTILES.iter().map(|&p| fmt(quantile(&values, p))));
            r
        }),
    )?;
    let config = RunConfig::default();
    let mut m = Manifest::new("forecast", &config, seed);
    m.notes.push(format!("horizon {horizon}"));
    m.input(chain_dir)?;
    m.input(x_path)?;
    m.output("draws.csv");
    m.output("summary.csv");
    m.write(out)
}

/// Reads a draws file into records, one per row label in file order.
fn read_draws(path: &Path, realized: &[f64]) -> CliResult<Vec<ForecastRecord>> {
    let file = fs::File::open(path).map_err(|e| CliError::read(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let head = rdr.headers().map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?.clone();
    let want = ["row", "draw", "mean", "variance", "value"];
    if head.len() != want.len() || head.iter().zip(want).any(|(a, b)| a != b) {
        return Err(CliError::Data(format!(
            "{}: expected header {}, found {}",
            path.display(),
            want.join(","),
            head.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<PredictiveDraw>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let num = |j: usize| {
            rec[j].trim().parse::<f64>().map_err(|_| {
                CliError::Data(format!("{}: row {}, column {}: '{}'", path.display(), i + 2, want[j], &rec[j]))
            })
        };
        let draw = PredictiveDraw {
            mean: num(2)?,
            variance: num(3)?,
            draw: num(4)?,
        };
        let label = rec[0].to_string();
        if !groups.contains_key(&label) {
            order.push(label.clone());
        }
        groups.entry(label).or_default().push(draw);
    }
    if order.len() != realized.len() {
        return Err(CliError::Data(format!(
            "{}: {} forecast rows but {} realized values",
            path.display(),
            order.len(),
            realized.len()
        )));
    }
    Ok(order
        .into_iter()
        .zip(realized)
        .map(|(l, &y)| ForecastRecord {
            draws: groups.remove(&l).unwrap_or_default(),
            realized: y,
            period: l,
        })
        .collect())
}

pub struct EvaluateArgs<'a> {
    pub model: &'a Path,
    pub benchmark: &'a Path,
    pub realized: &'a Path,
    pub out: &'a Path,
    pub model_name: &'a str,
    pub benchmark_name: &'a str,
    pub dataset: &'a str,
    pub dm: bool,
    pub fluctuation: Option<f64>,
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let realized = read_realized(a.realized)?;
    let model = read_draws(a.model, &realized)?;
    let bench = read_draws(a.benchmark, &realized)?;
    aligned(&model, &bench).map_err(|e| CliError::Data(e.to_string()))?;
    let mut rows = standard_metrics(a.model_name, a.dataset, &model)?;
    let bench_rows = standard_metrics(a.benchmark_name, a.dataset, &bench)?;
    for (m, b) in rows.clone().iter().zip(&bench_rows) {
        let (name, value) = if m.metric == "lpl" {
            ("lpl_diff".to_string(), m.value - b.value)
        } else {
            (format!("rel_{}", m.metric), m.value / b.value)
        };
        rows.push(MetricRow::new(a.model_name, a.dataset, &name, value));
    }
    rows.extend(bench_rows);
    if a.dm {
        let sq = |r: &[ForecastRecord]| -> CliResult<Vec<f64>> {
            r.iter().map(|x| Ok((x.realized - x.point()?).powi(2))).collect()
        };
        let d = dm_test(&sq(&model)?, &sq(&bench)?, 1)?;
        rows.push(MetricRow::new(a.model_name, a.dataset, "dm_stat", d.statistic));
        rows.push(MetricRow::new(a.model_name, a.dataset, "dm_pvalue", d.p_value));
    }
    if let Some(frac) = a.fluctuation {
        let diff: Vec<f64> = model
            .iter()
            .zip(&bench)
            .map(|(m, b)| Ok(m.log_score()? - b.log_score()?))
            .collect::<bnn_core::Result<_>>()?;
        let f = fluctuation_test(&diff, frac)?;
        let max = f.statistics.iter().fold(0.0f64, |acc, s| acc.max(s.abs()));
        rows.push(MetricRow::new(a.model_name, a.dataset, "fluct_max_abs", max));
        rows.push(MetricRow::new(a.model_name, a.dataset, "fluct_cv", f.critical_value));
        rows.push(MetricRow::new(a.model_name, a.dataset, "fluct_reject", f.rejects() as u8 as f64));
    }
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        out_dir(dir)?;
    }
    write_metric_rows(a.out, &rows)
}

fn write_metric_rows(path: &Path, rows: &[MetricRow]) -> CliResult<()> {
    write_rows(
        path,
        &header(&["model", "dataset", "metric", "value"]),
        rows.iter()
            .map(|r| vec![r.model.clone(), r.dataset.clone(), r.metric.clone(), fmt(r.value)]),
    )
}

fn forecast_table(path: &Path, fits: &[PeriodFit]) -> CliResult<()> {
    let mut head = header(&["period", "realized", "point", "sd"]);
    head.extend(header(&["q05", "q25", "q50", "q75", "q95", "log_score", "insample_r2", "active_neurons"]));
    let rows = fits
        .iter()
        .map(|f| {
            let r = &f.record;
            let values: Vec<f64> = r.draws.iter().map(|d| d.draw).collect();
            let mut row = vec![r.period.clone(), fmt(r.realized), fmt(r.point()?), fmt(variance(&values).sqrt())];
            for p in SUMMARY_QUANTILES {
                row.push(fmt(r.quantile(p)?));
            }
            row.push(fmt(r.log_score()?));
            row.push(fmt(f.insample_r2));
            row.push(f.active_neurons.map_or(String::new(), |a| a.to_string()));
            Ok(row)
        })
        .collect::<bnn_core::Result<Vec<_>>>()?;
    write_rows(path, &head, rows)
}

pub fn recursive(config: &RunConfig, data_path: &Path, out: &Path, benchmark: bool) -> CliResult<()> {
    config.sampler.validate()?;
    let data = read_dataset(data_path)?;
    out_dir(out)?;
    let r = &config.recursive;
    let options = RecursiveOptions {
        start_index: r.start_index,
        min_train: r.min_train,
        warm_start: r.warm_start,
        keep_chains: false,
        seed: config.sampler.seed,
    };
    let fits = recursive_forecast(&data, &config.sampler, &options)?;
    forecast_table(&out.join("forecasts.csv"), &fits)?;
    let mut pip_head = vec!["period".to_string()];
    pip_head.extend(ActivationKind::ALL.iter().map(|k| k.name().to_string()));
    write_rows(
        &out.join("pip.csv"),
        &pip_head,
        fits.iter().map(|f| {
            let mut row = vec![f.record.period.clone()];
            row.extend(f.pip.average.iter().map(|&v| fmt(v)));
            row
        }),
    )?;
    write_rows(
        &out.join("qstar.csv"),
        &header(&["period", "active_neurons"]),
        fits.iter().map(|f| vec![f.record.period.clone(), f.active_neurons.map_or(String::new(), |a| a.to_string())]),
    )?;
    let mut m = Manifest::new("recursive", config, config.sampler.seed);
    m.input(data_path)?;
    for f in ["forecasts.csv", "pip.csv", "qstar.csv"] {
        m.output(f);
    }
    if benchmark {
        let lin = bnn_core::SamplerConfig {
            linear_only: true,
            ..config.sampler.clone()
        };
        let bench = recursive_forecast(&data, &lin, &options)?;
        forecast_table(&out.join("benchmark_forecasts.csv"), &bench)?;
        let pts = r2_lpl_scatter(&fits, &bench)?;
        write_rows(
            &out.join("scatter.csv"),
            &header(&["period", "relative_r2", "relative_lpl"]),
            pts.iter()
                .map(|p| vec![p.period.clone(), fmt(p.relative_r2), fmt(p.relative_lpl)]),
        )?;
        m.output("benchmark_forecasts.csv");
        m.output("scatter.csv");
    }
    m.write(out)
}

pub fn replicate_table2(config: &RunConfig, out: &Path) -> CliResult<String> {
    let r = &config.replicate;
    let rep = ReplicationConfig {
        reps: r.reps,
        sampler: config.sampler.clone(),
        sv: r.sv,
        base_seed: r.base_seed,
        t: r.t,
        train_size: r.train_size,
        c_sq: r.c_sq,
        keep_chains: false,
    };
    rep.validate()?;
    if r.ks.is_empty() || r.ks.contains(&0) {
        return Err(CliError::Config("replicate.ks must list positive K values".into()));
    }
    out_dir(out)?;
    let specs = table2_grid(&r.ks);
    let cells = run_grid(&specs, &rep);
    let table = format_table2(&cells);
    let path = out.join("table2.txt");
    fs::write(&path, &table).map_err(|e| CliError::write(&path, e))?;
    let rows: Vec<MetricRow> = cells.iter().flat_map(|c| c.rows()).collect();
    write_metric_rows(&out.join("table2.csv"), &rows)?;
    let mut m = Manifest::new("replicate-table2", config, r.base_seed);
    for c in cells.iter().filter(|c| c.flagged()) {
        for f in &c.failures {
            m.notes.push(format!("{}: {f}", c.spec.label()));
        }
    }
    m.output("table2.txt");
    m.output("table2.csv");
    m.write(out)?;
    Ok(table)
}

//! Monte Carlo comparison of the network variants against the linear
//! horseshoe benchmark on synthetic data.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BnnError, Result};
use crate::evaluation::{lpl, quantile_score, rmse, ForecastRecord, MetricRow};
use crate::model::{ChainOutput, Dataset, SamplerConfig};
use crate::sampler::{predict, run_chain};
use crate::simulation::{generate, split, DgpConfig, DgpKind, DgpTruth, Noise, Sparsity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// One activation shared by all neurons.
    Bnn,
    /// Neuron-specific activations.
    BnnNs,
    /// Linear regression with a horseshoe prior.
    Linear,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Bnn, ModelKind::BnnNs, ModelKind::Linear];

    pub fn name(self) -> &'static str {
        match self {
            Self::Bnn => "BNN",
            Self::BnnNs => "BNN-NS",
            Self::Linear => "Linear",
        }
    }

    fn index(self) -> u64 {
        match self {
            Self::Bnn => 0,
            Self::BnnNs => 1,
            Self::Linear => 2,
        }
    }

    /// Sampler settings for this model on top of `base`. With `sv` the
    /// volatility persistence is fixed at zero (independent draws across
    /// rows); without it the error variance is constant.
    pub fn sampler_config(self, base: &SamplerConfig, sv: bool) -> SamplerConfig {
        SamplerConfig {
            linear_only: self == Self::Linear,
            common_activation: self == Self::Bnn,
            sv_enabled: sv,
            sv_rho_fixed: if sv { Some(0.0) } else { base.sv_rho_fixed },
            ..base.clone()
        }
    }
}

/// One design of the simulation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellSpec {
    pub k: usize,
    pub sparsity: Sparsity,
    pub noise: Noise,
    pub dgp_kind: DgpKind,
}

impl CellSpec {
    pub fn label(&self) -> String {
        format!("k{}_{}_{}_{}", self.k, self.sparsity, self.noise, self.dgp_kind)
    }

    fn code(&self) -> u64 {
        let s = matches!(self.sparsity, Sparsity::Sparse) as u64;
        let n = matches!(self.noise, Noise::Hetero) as u64;
        let d = matches!(self.dgp_kind, DgpKind::Nonlinear) as u64;
        ((self.k as u64) << 3) | (s << 2) | (n << 1) | d
    }
}

/// The full grid: K × sparsity × noise × DGP.
pub fn table2_grid(ks: &[usize]) -> Vec<CellSpec> {
    let mut out = Vec::new();
    for &k in ks {
        for sparsity in [Sparsity::Dense, Sparsity::Sparse] {
            for noise in [Noise::Homo, Noise::Hetero] {
                for dgp_kind in [DgpKind::Nonlinear, DgpKind::Linear] {
                    out.push(CellSpec {
                        k,
                        sparsity,
                        noise,
                        dgp_kind,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplicationConfig {
    pub reps: usize,
    pub sampler: SamplerConfig,
    /// Estimate with stochastic volatility (otherwise constant variance).
    pub sv: bool,
    pub base_seed: u64,
    pub t: usize,
    pub train_size: usize,
    pub c_sq: f64,
    /// Keep every fitted chain in the output.
    pub keep_chains: bool,
}

impl Default for ReplicationConfig {
    fn default() -> Self {
        Self {
            reps: 5,
            sampler: SamplerConfig::desk(),
            sv: true,
            base_seed: 1,
            t: 200,
            train_size: 100,
            c_sq: 0.5,
            keep_chains: false,
        }
    }
}

impl ReplicationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(BnnError::Config("reps must be at least 1".into()));
        }
        self.sampler.validate()?;
        self.dgp(&table2_grid(&[1])[0], 1).validate()
    }

    pub fn dgp(&self, spec: &CellSpec, rep: usize) -> DgpConfig {
        DgpConfig {
            k: spec.k,
            dgp_kind: spec.dgp_kind,
            sparsity: spec.sparsity,
            noise: spec.noise,
            t: self.t,
            train_size: self.train_size,
            c_sq: self.c_sq,
            seed: self.base_seed + rep as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub rmse: f64,
    pub qs25: f64,
    pub qs75: f64,
    pub lpl: f64,
}

impl Scores {
    pub fn of(records: &[ForecastRecord]) -> Result<Self> {
        Ok(Self {
            rmse: rmse(records)?,
            qs25: quantile_score(records, 0.25)?,
            qs75: quantile_score(records, 0.75)?,
            lpl: lpl(records)?.total,
        })
    }
}

/// Results of one model on one replication.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRun {
    pub model: ModelKind,
    pub scores: Scores,
    pub records: Vec<ForecastRecord>,
    pub chain: Option<ChainOutput>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationRun {
    pub spec: CellSpec,
    pub rep: usize,
    pub truth: DgpTruth,
    pub train: Vec<usize>,
    pub runs: Vec<ModelRun>,
}

impl ReplicationRun {
    pub fn run(&self, model: ModelKind) -> Option<&ModelRun> {
        self.runs.iter().find(|r| r.model == model)
    }
}

/// Forecast records for every row of `holdout`.
pub fn holdout_records<R: rand::Rng + ?Sized>(
    chain: &ChainOutput,
    holdout: &Dataset,
    rng: &mut R,
) -> Result<Vec<ForecastRecord>> {
    (0..holdout.len())
        .map(|t| {
            Ok(ForecastRecord {
                draws: predict(chain, &holdout.row(t), 1, rng)?,
                realized: holdout.y[t],
                period: holdout.label(t),
            })
        })
        .collect()
}

/// Simulates replication `rep` (1-based) of `spec`, fits each model on the
/// training rows and scores its hold-out forecasts.
pub fn run_replication(
    spec: &CellSpec,
    rep: usize,
    config: &ReplicationConfig,
    models: &[ModelKind],
) -> Result<ReplicationRun> {
    let dgp = config.dgp(spec, rep);
    let mut rng = ChaCha8Rng::seed_from_u64(dgp.seed);
    rng.set_stream(spec.code() << 8);
    let (data, truth) = generate(&dgp, &mut rng)?;
    let (train, holdout) = split(&data, &truth, &dgp, &mut rng)?;
    let runs = models
        .iter()
        .map(|&model| {
            let mut rng = ChaCha8Rng::seed_from_u64(dgp.seed);
            rng.set_stream((spec.code() << 8) | (model.index() + 1));
            let sampler = model.sampler_config(&config.sampler, config.sv);
            let chain = run_chain(&train, &sampler, &mut rng)?;
            let records = holdout_records(&chain, &holdout, &mut rng)?;
            Ok(ModelRun {
                model,
                scores: Scores::of(&records)?,
                records,
                chain: config.keep_chains.then_some(chain),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicationRun {
        spec: *spec,
        rep,
        truth,
        train: train.row_ids.clone(),
        runs,
    })
}

/// Averages over replications for one design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub spec: CellSpec,
    pub reps_completed: usize,
    /// Messages of failed replications.
    pub failures: Vec<String>,
    /// Mean absolute scores per model.
    pub mean_scores: Vec<(ModelKind, Scores)>,
    /// Mean score of each model divided by the benchmark's mean score
    /// (LPL as a difference instead of a ratio).
    pub relative: Vec<(ModelKind, Scores)>,
}

impl CellResult {
    pub fn flagged(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn relative_of(&self, model: ModelKind) -> Option<Scores> {
        self.relative.iter().find(|(m, _)| *m == model).map(|(_, s)| *s)
    }

    pub fn mean_of(&self, model: ModelKind) -> Option<Scores> {
        self.mean_scores.iter().find(|(m, _)| *m == model).map(|(_, s)| *s)
    }

    /// Tidy rows: absolute and relative scores per model.
    pub fn rows(&self) -> Vec<MetricRow> {
        let ds = self.spec.label();
        let mut out = Vec::new();
        for (m, s) in &self.mean_scores {
            for (name, v) in [("rmse", s.rmse), ("qs25", s.qs25), ("qs75", s.qs75), ("lpl", s.lpl)] {
                out.push(MetricRow::new(m.name(), &ds, name, v));
            }
        }
        for (m, s) in &self.relative {
            for (name, v) in [
                ("rel_rmse", s.rmse),
                ("rel_qs25", s.qs25),
                ("rel_qs75", s.qs75),
                ("lpl_diff", s.lpl),
            ] {
                out.push(MetricRow::new(m.name(), &ds, name, v));
            }
        }
        out
    }
}

/// Combines finished replications of one design, benchmarking against the
/// linear model.
pub fn summarize_cell(spec: &CellSpec, runs: &[Result<ReplicationRun>]) -> CellResult {
    let ok: Vec<&ReplicationRun> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failures: Vec<String> = runs
        .iter()
        .filter_map(|r| r.as_ref().err().map(|e| e.to_string()))
        .collect();
    let mut mean_scores = Vec::new();
    for model in ModelKind::ALL {
        let s: Vec<Scores> = ok.iter().filter_map(|r| r.run(model).map(|m| m.scores)).collect();
        if s.is_empty() {
            continue;
        }
        let n = s.len() as f64;
        mean_scores.push((
            model,
            Scores {
                rmse: s.iter().map(|x| x.rmse).sum::<f64>() / n,
                qs25: s.iter().map(|x| x.qs25).sum::<f64>() / n,
                qs75: s.iter().map(|x| x.qs75).sum::<f64>() / n,
                lpl: s.iter().map(|x| x.lpl).sum::<f64>() / n,
            },
        ));
    }
    let bench = mean_scores.iter().find(|(m, _)| *m == ModelKind::Linear).map(|(_, s)| *s);
    let relative = match bench {
        Some(b) => mean_scores
            .iter()
            .map(|(m, s)| {
                (
                    *m,
                    Scores {
                        rmse: s.rmse / b.rmse,
                        qs25: s.qs25 / b.qs25,
                        qs75: s.qs75 / b.qs75,
                        lpl: s.lpl - b.lpl,
                    },
                )
            })
            .collect(),
        None => Vec::new(),
    };
    CellResult {
        spec: *spec,
        reps_completed: ok.len(),
        failures,
        mean_scores,
        relative,
    }
}

/// Runs every replication of one design.
pub fn run_cell(spec: &CellSpec, config: &ReplicationConfig, models: &[ModelKind]) -> (CellResult, Vec<ReplicationRun>) {
    let runs: Vec<Result<ReplicationRun>> = (1..=config.reps)
        .into_par_iter()
        .map(|rep| run_replication(spec, rep, config, models))
        .collect();
    let summary = summarize_cell(spec, &runs);
    (summary, runs.into_iter().filter_map(|r| r.ok()).collect())
}

/// Runs a list of designs, parallel over (design, replication) pairs.
pub fn run_grid(specs: &[CellSpec], config: &ReplicationConfig) -> Vec<CellResult> {
    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|c| (1..=config.reps).map(move |r| (c, r)))
        .collect();
    let results: Vec<(usize, Result<ReplicationRun>)> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let mut cfg = config.clone();
            cfg.keep_chains = false;
            (c, run_replication(&specs[c], r, &cfg, &ModelKind::ALL))
        })
        .collect();
    let mut by_cell: Vec<Vec<Result<ReplicationRun>>> = (0..specs.len()).map(|_| Vec::new()).collect();
    for (c, r) in results {
        by_cell[c].push(r);
    }
    specs
        .iter()
        .zip(by_cell)
        .map(|(s, runs)| summarize_cell(s, &runs))
        .collect()
}

/// Plain-text table: one block per (K, sparsity, noise) with relative RMSE
/// on the first line and relative QS25 / QS75 in parentheses beneath, for
/// the nonlinear and the linear DGP side by side. The linear model columns
/// hold absolute values. Failed cells carry a `!`.
pub fn format_table2(cells: &[CellResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>3} {:<8} {:<7} | {:>9} {:>9} {:>9} | {:>9} {:>9} {:>9}",
        "K", "sparsity", "noise", "BNN", "BNN-NS", "Linear", "BNN", "BNN-NS", "Linear"
    );
    let _ = writeln!(out, "{:<20} | {:^29} | {:^29}", "", "nonlinear DGP", "linear DGP");
    let mut keys: Vec<(usize, Sparsity, Noise)> = Vec::new();
    for c in cells {
        let key = (c.spec.k, c.spec.sparsity, c.spec.noise);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for (k, sparsity, noise) in keys {
        let find = |d: DgpKind| {
            cells
                .iter()
                .find(|c| c.spec.k == k && c.spec.sparsity == sparsity && c.spec.noise == noise && c.spec.dgp_kind == d)
        };
        let mut lines = [String::new(), String::new(), String::new()];
        lines[0] = format!("{:>3} {:<8} {:<7}", k, sparsity.to_string(), noise.to_string());
        lines[1] = format!("{:<20}", "");
        lines[2] = format!("{:<20}", "");
        for d in [DgpKind::Nonlinear, DgpKind::Linear] {
            for line in &mut lines {
                line.push_str(" |");
            }
            let cell = find(d);
            for model in ModelKind::ALL {
                let vals = cell.and_then(|c| {
                    if model == ModelKind::Linear {
                        c.mean_of(model)
                    } else {
                        c.relative_of(model)
                    }
                });
                let flag = if cell.is_some_and(CellResult::flagged) { "!" } else { "" };
                match vals {
                    Some(s) => {
                        lines[0].push_str(&format!(" {:>9}", format!("{:.3}{flag}", s.rmse)));
                        lines[1].push_str(&format!(" {:>9}", format!("({:.3})", s.qs25)));
                        lines[2].push_str(&format!(" {:>9}", format!("({:.3})", s.qs75)));
                    }
                    None => {
                        for line in &mut lines {
                            line.push_str(&format!(" {:>9}", "-"));
                        }
                    }
                }
            }
        }
        for line in lines {
            let _ = writeln!(out, "{line}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ReplicationConfig {
        ReplicationConfig {
            reps: 2,
            sampler: SamplerConfig {
                n_draws: 140,
                n_burn: 40,
                ..Default::default()
            },
            t: 60,
            train_size: 30,
            ..Default::default()
        }
    }

    #[test]
    fn grid_has_sixteen_cells_per_two_k() {
        let g = table2_grid(&[30, 60]);
        assert_eq!(g.len(), 16);
        let labels: std::collections::HashSet<String> = g.iter().map(CellSpec::label).collect();
        assert_eq!(labels.len(), 16);
    }

    #[test]
    fn model_configs() {
        let base = SamplerConfig::desk();
        let l = ModelKind::Linear.sampler_config(&base, true);
        assert!(l.linear_only && l.sv_enabled && l.sv_rho_fixed == Some(0.0));
        let b = ModelKind::Bnn.sampler_config(&base, false);
        assert!(b.common_activation && !b.sv_enabled);
        assert_eq!(b.n_draws, 3000);
    }

    #[test]
    fn small_cell_runs_and_formats() {
        let spec = CellSpec {
            k: 4,
            sparsity: Sparsity::Dense,
            noise: Noise::Homo,
            dgp_kind: DgpKind::Linear,
        };
        let (cell, runs) = run_cell(&spec, &tiny(), &ModelKind::ALL);
        assert_eq!(cell.reps_completed, 2);
        assert_eq!(runs.len(), 2);
        assert_eq!(cell.relative_of(ModelKind::Linear).unwrap().rmse, 1.0);
        assert_eq!(cell.relative_of(ModelKind::Linear).unwrap().lpl, 0.0);
        assert_eq!(runs[0].run(ModelKind::Bnn).unwrap().records.len(), 30);
        let table = format_table2(&[cell.clone()]);
        assert!(table.contains("dense"));
        assert_eq!(table.lines().count(), 5);
        assert_eq!(cell.rows().len(), 24);
    }

    #[test]
    fn replications_are_reproducible() {
        let spec = CellSpec {
            k: 3,
            sparsity: Sparsity::Sparse,
            noise: Noise::Hetero,
            dgp_kind: DgpKind::Nonlinear,
        };
        let a = run_replication(&spec, 1, &tiny(), &[ModelKind::Linear]).unwrap();
        let b = run_replication(&spec, 1, &tiny(), &[ModelKind::Linear]).unwrap();
        assert_eq!(a.runs[0].scores, b.runs[0].scores);
        assert_eq!(a.train, b.train);
    }

    #[test]
    fn failed_replications_are_flagged() {
        let spec = table2_grid(&[3])[0];
        let runs = vec![Err(BnnError::Argument("boom".into()))];
        let cell = summarize_cell(&spec, &runs);
        assert!(cell.flagged());
        assert_eq!(cell.reps_completed, 0);
        assert!(format_table2(&[cell]).contains('-'));
    }
}

//! On-disk chain archives.
//!
//! CSV layout: one file per parameter block, one row per retained draw,
//! plus `meta.json`. Binary layout: `chain.bin` (bincode of the whole chain)
//! plus `meta.json`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use bnn_core::model::{ChainOutput, HorseshoeState, MgpState, NeuronAcceptance, SvState};
use bnn_core::{ActivationKind, NetworkState};
use clap::ValueEnum;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{fmt, read_table, write_rows};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ArchiveFormat {
    Csv,
    Binary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainMeta {
    pub format: ArchiveFormat,
    pub k: usize,
    pub q: usize,
    pub t: usize,
    pub draws: usize,
    pub thin: usize,
    pub n_sweeps: usize,
    pub n_burn: usize,
    pub elapsed_secs: f64,
    pub homoskedastic: bool,
    /// MGP shapes, constant over the chain.
    pub mgp_a1: f64,
    pub mgp_a2: f64,
    pub acceptance: Vec<NeuronAcceptance>,
    pub final_state: NetworkState,
}

const META: &str = "meta.json";
const BINARY: &str = "chain.bin";

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

fn nums(v: impl IntoIterator<Item = f64>) -> Vec<String> {
    v.into_iter().map(fmt).collect()
}

pub fn write_chain(dir: &Path, chain: &ChainOutput, format: ArchiveFormat) -> CliResult<()> {
    let first = chain
        .draws
        .first()
        .ok_or_else(|| CliError::Numerical("chain has no retained draws".into()))?;
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
    let (k, q, t) = (first.n_covariates(), first.n_neurons(), first.sv.log_vol.len());
    let meta = ChainMeta {
        format,
        k,
        q,
        t,
        draws: chain.len(),
        thin: chain.thin,
        n_sweeps: chain.n_sweeps,
        n_burn: chain.n_burn,
        elapsed_secs: chain.elapsed_secs,
        homoskedastic: first.sv.homoskedastic,
        mgp_a1: first.mgp.a1,
        mgp_a2: first.mgp.a2,
        acceptance: chain.acceptance.clone(),
        final_state: chain.final_state.clone(),
    };
    let meta_path = dir.join(META);
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&meta_path, text).map_err(|e| CliError::write(&meta_path, e))?;

    match format {
        ArchiveFormat::Binary => {
            let path = dir.join(BINARY);
            let f = File::create(&path).map_err(|e| CliError::write(&path, e))?;
            bincode::serialize_into(BufWriter::new(f), chain)
                .map_err(|e| CliError::write(&path, std::io::Error::other(e.to_string())))
        }
        ArchiveFormat::Csv => write_csv_blocks(dir, chain, k, q, t),
    }
}

fn write_csv_blocks(dir: &Path, chain: &ChainOutput, k: usize, q: usize, t: usize) -> CliResult<()> {
    let d = &chain.draws;
    write_rows(&dir.join("gamma.csv"), &names("gamma", k), d.iter().map(|s| nums(s.gamma.iter().copied())))?;
    write_rows(&dir.join("beta.csv"), &names("beta", q), d.iter().map(|s| nums(s.beta.iter().copied())))?;
    let kappa_header: Vec<String> = (1..=q)
        .flat_map(|r| (1..=k).map(move |j| format!("kappa_{j}_{r}")))
        .collect();
    write_rows(&dir.join("kappa.csv"), &kappa_header, d.iter().map(|s| nums(s.kappa.iter().copied())))?;
    write_rows(&dir.join("zeta.csv"), &names("zeta", q), d.iter().map(|s| nums(s.zeta.iter().copied())))?;
    write_rows(
        &dir.join("delta.csv"),
        &names("delta", q),
        d.iter().map(|s| s.delta.iter().map(|a| a.code().to_string()).collect::<Vec<_>>()),
    )?;
    write_rows(
        &dir.join("sv.csv"),
        &["mu".into(), "rho".into(), "state_var".into()],
        d.iter().map(|s| nums([s.sv.mu, s.sv.rho, s.sv.state_var])),
    )?;
    write_rows(&dir.join("log_vol.csv"), &names("nu", t), d.iter().map(|s| nums(s.sv.log_vol.iter().copied())))?;
    let mut hs_header = vec!["lambda_sq".to_string()];
    hs_header.extend(names("phi_sq", k));
    write_rows(
        &dir.join("hs_gamma.csv"),
        &hs_header,
        d.iter().map(|s| {
            let mut r = vec![fmt(s.hs_gamma.global_scale_sq)];
            r.extend(nums(s.hs_gamma.local_scales_sq.iter().copied()));
            r
        }),
    )?;
    let hk_header: Vec<String> = (1..=q)
        .flat_map(|r| {
            std::iter::once(format!("lambda_sq_{r}")).chain((1..=k).map(move |j| format!("phi_sq_{j}_{r}")))
        })
        .collect();
    write_rows(
        &dir.join("hs_kappa.csv"),
        &hk_header,
        d.iter().map(|s| {
            s.hs_kappa
                .iter()
                .flat_map(|h| std::iter::once(fmt(h.global_scale_sq)).chain(nums(h.local_scales_sq.iter().copied())))
                .collect::<Vec<_>>()
        }),
    )?;
    write_rows(&dir.join("mgp.csv"), &names("component", q), d.iter().map(|s| nums(s.mgp.components.iter().copied())))?;
    write_rows(
        &dir.join("trace.csv"),
        &["draw".into(), "log_posterior".into(), "qstar".into()],
        (0..d.len()).map(|i| vec![i.to_string(), fmt(chain.log_posterior[i]), chain.qstar[i].to_string()]),
    )
}

fn read_meta(dir: &Path) -> CliResult<ChainMeta> {
    let path = dir.join(META);
    let text = fs::read_to_string(&path).map_err(|e| CliError::read(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn block(dir: &Path, name: &str, width: usize, draws: usize) -> CliResult<Vec<Vec<f64>>> {
    let path = dir.join(name);
    if width == 0 {
        return Ok(vec![Vec::new(); draws]);
    }
    let table = read_table(&path)?;
    if table.columns.len() != width || table.rows.len() != draws {
        return Err(CliError::Data(format!(
            "{}: expected {draws} rows x {width} columns, found {} x {}",
            path.display(),
            table.rows.len(),
            table.columns.len()
        )));
    }
    Ok(table.rows)
}

pub fn read_chain(dir: &Path) -> CliResult<ChainOutput> {
    let meta = read_meta(dir)?;
    if meta.format == ArchiveFormat::Binary {
        let path = dir.join(BINARY);
        let f = File::open(&path).map_err(|e| CliError::read(&path, e))?;
        return bincode::deserialize_from(BufReader::new(f))
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())));
    }
    let (k, q, t, n) = (meta.k, meta.q, meta.t, meta.draws);
    let gamma = block(dir, "gamma.csv", k, n)?;
    let beta = block(dir, "beta.csv", q, n)?;
    let kappa = block(dir, "kappa.csv", k * q, n)?;
    let zeta = block(dir, "zeta.csv", q, n)?;
    let delta = block(dir, "delta.csv", q, n)?;
    let sv = block(dir, "sv.csv", 3, n)?;
    let log_vol = block(dir, "log_vol.csv", t, n)?;
    let hs_gamma = block(dir, "hs_gamma.csv", k + 1, n)?;
    let hs_kappa = block(dir, "hs_kappa.csv", q * (k + 1), n)?;
    let mgp = block(dir, "mgp.csv", q, n)?;
    let trace = block(dir, "trace.csv", 3, n)?;

    let horseshoe = |row: &[f64]| {
        let mut h = HorseshoeState::new(row.len() - 1);
        h.global_scale_sq = row[0];
        h.local_scales_sq = row[1..].to_vec();
        h
    };
    let draws = (0..n)
        .map(|i| {
            let delta = delta[i]
                .iter()
                .map(|&c| {
                    ActivationKind::from_code(c as u8)
                        .filter(|_| c.fract() == 0.0)
                        .ok_or_else(|| CliError::Data(format!("delta.csv row {}: bad activation code {c}", i + 2)))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let state = NetworkState {
                gamma: gamma[i].clone(),
                beta: beta[i].clone(),
                kappa: DMatrix::from_column_slice(k, q, &kappa[i]),
                zeta: zeta[i].clone(),
                delta,
                hs_gamma: horseshoe(&hs_gamma[i]),
                hs_kappa: hs_kappa[i].chunks(k + 1).map(horseshoe).collect(),
                mgp: MgpState {
                    components: mgp[i].clone(),
                    a1: meta.mgp_a1,
                    a2: meta.mgp_a2,
                },
                sv: SvState {
                    log_vol: log_vol[i].clone(),
                    mu: sv[i][0],
                    rho: sv[i][1],
                    state_var: sv[i][2],
                    homoskedastic: meta.homoskedastic,
                },
            };
            state.validate()?;
            Ok(state)
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(ChainOutput {
        draws,
        log_posterior: trace.iter().map(|r| r[1]).collect(),
        qstar: trace.iter().map(|r| r[2] as usize).collect(),
        acceptance: meta.acceptance,
        final_state: meta.final_state,
        thin: meta.thin,
        n_sweeps: meta.n_sweeps,
        n_burn: meta.n_burn,
        elapsed_secs: meta.elapsed_secs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bnn_core::sampler::run_chain;
    use bnn_core::{Dataset, SamplerConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain() -> ChainOutput {
        let x = DMatrix::from_fn(30, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let y = (0..30).map(|i| x[(i, 0)].tanh() + 0.1 * ((i % 5) as f64 - 2.0)).collect();
        let data = Dataset::new(y, x).unwrap();
        let cfg = SamplerConfig {
            n_draws: 40,
            n_burn: 20,
            ..Default::default()
        };
        run_chain(&data, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
    }

    fn same_draws(a: &ChainOutput, b: &ChainOutput) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.draws.iter().zip(&b.draws) {
            assert_eq!(x.gamma, y.gamma);
            assert_eq!(x.beta, y.beta);
            assert_eq!(x.kappa, y.kappa);
            assert_eq!(x.zeta, y.zeta);
            assert_eq!(x.delta, y.delta);
            assert_eq!(x.sv, y.sv);
            assert_eq!(x.mgp, y.mgp);
            assert_eq!(x.hs_gamma.local_scales_sq, y.hs_gamma.local_scales_sq);
        }
        assert_eq!(a.log_posterior, b.log_posterior);
        assert_eq!(a.qstar, b.qstar);
    }

    #[test]
    fn csv_round_trip_keeps_the_draws() {
        let c = chain();
        let dir = tempfile::tempdir().unwrap();
        write_chain(dir.path(), &c, ArchiveFormat::Csv).unwrap();
        same_draws(&c, &read_chain(dir.path()).unwrap());
    }

    #[test]
    fn binary_round_trip_is_complete() {
        let c = chain();
        let dir = tempfile::tempdir().unwrap();
        write_chain(dir.path(), &c, ArchiveFormat::Binary).unwrap();
        let back = read_chain(dir.path()).unwrap();
        same_draws(&c, &back);
        assert_eq!(c.draws, back.draws);
    }

    #[test]
    fn truncated_block_is_a_data_error() {
        let c = chain();
        let dir = tempfile::tempdir().unwrap();
        write_chain(dir.path(), &c, ArchiveFormat::Csv).unwrap();
        fs::write(dir.path().join("beta.csv"), "beta_1,beta_2\n1,2\n").unwrap();
        assert_eq!(read_chain(dir.path()).err().unwrap().exit_code(), 3);
    }
}

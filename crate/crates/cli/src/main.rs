//! `bnn`: simulate data, fit networks, forecast, evaluate and replicate the
//! simulation table from the command line.

mod archive;
mod commands;
mod config;
mod error;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::archive::ArchiveFormat;
use crate::commands::EvaluateArgs;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "bnn", version, about = "Bayesian neural network regression with shrinkage and stochastic volatility")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and split it into train and hold-out files.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides dgp.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the sampler on a data CSV and write a chain archive.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: ArchiveFormat,
        /// Fit the linear horseshoe benchmark.
        #[arg(long)]
        linear_only: bool,
        /// One activation shared by all neurons.
        #[arg(long)]
        common_activation: bool,
        /// Overrides sampler.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Predictive draws and summaries at new covariate rows.
    Forecast {
        /// Chain archive directory written by `fit`.
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        x_new: PathBuf,
        #[arg(long, default_value_t = 1)]
        horizon: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two forecast draw files against realized values.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long)]
        realized: PathBuf,
        /// Metrics CSV to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "model")]
        model_name: String,
        #[arg(long, default_value = "benchmark")]
        benchmark_name: String,
        #[arg(long, default_value = "data")]
        dataset: String,
        /// Add a Diebold-Mariano test on squared errors.
        #[arg(long)]
        dm: bool,
        /// Add a fluctuation test on log-score differences with this window share.
        #[arg(long)]
        fluctuation: Option<f64>,
    },
    /// Inefficiency factors and Raftery-Lewis counts per parameter block.
    Diagnose {
        #[arg(long)]
        chain: PathBuf,
        /// Diagnostics CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Expanding-window one-step forecasts over a data file.
    Recursive {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also run the linear benchmark and write the R2 / LPL scatter.
        #[arg(long)]
        benchmark: bool,
        /// Overrides recursive.start_index.
        #[arg(long)]
        start: Option<usize>,
        #[arg(long)]
        warm_start: bool,
    },
    /// Run the K x sparsity x noise x DGP simulation grid.
    #[command(name = "replicate-table2")]
    ReplicateTable2 {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides replicate.reps.
        #[arg(long)]
        reps: Option<usize>,
        /// Estimate with constant error variance instead of SV.
        #[arg(long)]
        homoskedastic: bool,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let mut c = RunConfig::load(config.as_deref())?;
            if let Some(s) = seed {
                c.dgp.seed = s;
            }
            commands::simulate(&c, &out)
        }
        Command::Fit {
            data,
            config,
            out,
            format,
            linear_only,
            common_activation,
            seed,
        } => {
            let mut c = RunConfig::load(config.as_deref())?;
            c.sampler.linear_only |= linear_only;
            c.sampler.common_activation |= common_activation;
            if let Some(s) = seed {
                c.sampler.seed = s;
            }
            commands::fit(&c, &data, &out, format)
        }
        Command::Forecast {
            chain,
            x_new,
            horizon,
            seed,
            out,
        } => commands::forecast(&chain, &x_new, horizon, seed, &out),
        Command::Evaluate {
            model,
            benchmark,
            realized,
            out,
            model_name,
            benchmark_name,
            dataset,
            dm,
            fluctuation,
        } => commands::evaluate(&EvaluateArgs {
            model: &model,
            benchmark: &benchmark,
            realized: &realized,
            out: &out,
            model_name: &model_name,
            benchmark_name: &benchmark_name,
            dataset: &dataset,
            dm,
            fluctuation,
        }),
        Command::Diagnose { chain, out } => commands::diagnose(&chain, &out),
        Command::Recursive {
            data,
            config,
            out,
            benchmark,
            start,
            warm_start,
        } => {
            let mut c = RunConfig::load(config.as_deref())?;
            if let Some(s) = start {
                c.recursive.start_index = s;
            }
            c.recursive.warm_start |= warm_start;
            commands::recursive(&c, &data, &out, benchmark)
        }
        Command::ReplicateTable2 {
            config,
            out,
            reps,
            homoskedastic,
        } => {
            let mut c = RunConfig::load(config.as_deref())?;
            if let Some(r) = reps {
                c.replicate.reps = r;
            }
            if homoskedastic {
                c.replicate.sv = false;
            }
            let table = commands::replicate_table2(&c, &out)?;
            print!("{table}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors, matching the config code.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bnn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod figures;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use condmean::rate::{log_spaced_grid, Agents};
use condmean::vector::VectorEstimateConfig;
use condmean::InputDistribution;

use crate::commands::Diagnostics;
use crate::error::CliError;
use crate::figures::FigureId;
use crate::output::{sink, Format, Units};

/// Entropy of the conditional mean under Gaussian noise: reports, bound sweeps,
/// rate-loss curves and figure data.
///
/// Exit status: 0 success, 1 parse or configuration error, 2 domain error,
/// 3 convergence failure, 4 invariant violation under `--strict`.
#[derive(Debug, Parser)]
#[command(name = "cmean", version)]
struct Cli {
    /// Units of entropies and rates in the output; the conversion happens only when writing.
    #[arg(long, value_enum, default_value_t = Units::Nats, global = true)]
    units: Units,

    /// Treat warnings (bound-order violations, clipped values, failed self-checks) as failures.
    #[arg(long, global = true)]
    strict: bool,

    /// Seed of every Monte Carlo estimate.
    #[arg(long, default_value_t = 42, global = true)]
    seed: u64,

    /// Output file; standard output when absent.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Entropies, moments and bounds for one scalar channel.
    Report {
        /// Input spec, e.g. `gaussian:mu=0,var=1` or `gm2:var=2`.
        input: String,
        #[arg(long, default_value_t = 1.0)]
        noise_var: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Bounds against input variance for one family, as CSV.
    Sweep {
        /// Family name: gaussian, uniform, exponential, laplace, triangular or gm2.
        family: String,
        /// Increasing input variances.
        #[arg(long, value_delimiter = ',', default_values_t = figures::VARIANCE_GRID)]
        vars: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        noise_var: f64,
    },
    /// Remote and CEO rate bounds against distortion, as CSV.
    RateLoss {
        /// Input spec, e.g. `laplace:var=1`.
        input: String,
        #[arg(long, default_value_t = 1.0)]
        noise_var: f64,
        /// Number of agents, or `inf`.
        #[arg(long, default_value = "2")]
        agents: Agents,
        /// Increasing distortions; defaults to 50 log-spaced points in (0.02·σ_X², σ_X²).
        #[arg(long, value_delimiter = ',')]
        d: Option<Vec<f64>>,
    },
    /// Gap of the exponential-family bound for a Beta-prime prior against d, as CSV.
    Expofam {
        /// Increasing values of d = α − γ; defaults to 41 log-spaced points in [0.01, 100].
        #[arg(long, value_delimiter = ',')]
        d: Option<Vec<f64>>,
        /// Also compute the gap numerically for the prior with this γ.
        #[arg(long)]
        numeric_gamma: Option<f64>,
    },
    /// Bounds for a vector channel, as JSON.
    Vector {
        /// Channel spec, e.g. `vec:n=2,input=prod(uniform:var=1;laplace:var=1),Kw=[[1,0],[0,0.5]]`.
        spec: String,
        #[arg(long, default_value_t = 1_000_000)]
        entropy_samples: usize,
        #[arg(long, default_value_t = 20_000)]
        expectation_samples: usize,
        /// Neighbour rank of the kNN entropy estimate.
        #[arg(long, default_value_t = 4)]
        k: usize,
    },
    /// CSV data and a manifest for one figure.
    Figure {
        #[arg(value_enum)]
        id: FigureId,
        /// Directory receiving the CSV files and `<id>_manifest.json`.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Runs the invariant suite and prints one line per property.
    Selftest,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut diag = Diagnostics::new(cli.strict);
    let out = || sink(cli.output.as_deref());
    match cli.command {
        Command::Report {
            ref input,
            noise_var,
            format,
        } => {
            let input: InputDistribution = input.parse()?;
            commands::report(&input, noise_var, cli.units, format, &mut diag, out()?)?;
        }
        Command::Sweep {
            ref family,
            ref vars,
            noise_var,
        } => commands::sweep_table(family, vars, noise_var, cli.units, true, &mut diag)?
            .write(out()?)?,
        Command::RateLoss {
            ref input,
            noise_var,
            agents,
            ref d,
        } => {
            let input: InputDistribution = input.parse()?;
            let var = input.variance();
            let grid = match d {
                Some(d) => d.clone(),
                None => log_spaced_grid(0.02 * var, var, 50)?,
            };
            let curve = commands::rate_curve(&input, noise_var, agents, &grid)?;
            commands::rate_table(&curve, cli.units).write(out()?)?;
        }
        Command::Expofam {
            ref d,
            numeric_gamma,
        } => {
            let ds = d.clone().unwrap_or_else(figures::d_grid);
            commands::expofam_table(&ds, numeric_gamma, cli.units, &mut diag)?.write(out()?)?;
        }
        Command::Vector {
            ref spec,
            entropy_samples,
            expectation_samples,
            k,
        } => {
            let cfg = VectorEstimateConfig {
                entropy_samples,
                expectation_samples,
                k,
                seed: cli.seed,
            };
            commands::vector(spec, &cfg, cli.units, &mut diag, out()?)?;
        }
        Command::Figure { id, ref out_dir } => {
            figures::emit(id, out_dir, cli.units, cli.seed, &mut diag)?;
        }
        Command::Selftest => selftest::run(cli.seed, &mut diag, out()?)?,
    }
    diag.finish()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Command-line front end: fit, grid selection, simulation, and diagnostics
//! as reproducible batch commands. Every flag can also be set through an
//! environment variable with the `TRANSHAZ_` prefix.

mod manifest;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use runner::{ChainSpec, CliError, DiagnoseSpec, FitSpec, SelectSpec, SimulateSpec};
use transhaz::data::{Censoring, CovariateSpec};

#[derive(Parser)]
#[command(
    name = "transhaz",
    version,
    about = "Bayesian transformation hazard models for right-censored survival data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model at a fixed transformation index and interval count
    Fit(FitArgs),
    /// Fit a grid of (gamma, J) models and rank them by B and DIC
    Select(SelectArgs),
    /// Generate a synthetic dataset with a constant baseline hazard
    Simulate(SimulateArgs),
    /// Convergence and acceptance diagnostics for an existing samples file
    Diagnose(DiagnoseArgs),
    /// Re-run a recorded manifest, reproducing its outputs bit-exactly
    Rerun(RerunArgs),
}

#[derive(Args)]
struct ChainArgs {
    /// Prior standard deviation for the coefficients: one value broadcast to
    /// all, or a comma list with one value per covariate
    #[arg(long, default_value = "100", env = "TRANSHAZ_SIGMA")]
    sigma: String,

    /// Shape of the Gamma prior on each baseline level
    #[arg(long, default_value_t = 2.0, env = "TRANSHAZ_ALPHA")]
    alpha: f64,

    /// Rate of the Gamma prior on each baseline level
    #[arg(long, default_value_t = 0.01, env = "TRANSHAZ_XI")]
    xi: f64,

    /// Iterations discarded before retention
    #[arg(long = "burn-in", default_value_t = 2000, env = "TRANSHAZ_BURN_IN")]
    burn_in: usize,

    /// Keep every thin-th post-burn-in sweep
    #[arg(long, default_value_t = 5, env = "TRANSHAZ_THIN")]
    thin: usize,

    /// Number of retained posterior draws
    #[arg(long, default_value_t = 10_000, env = "TRANSHAZ_SAMPLES")]
    samples: usize,

    /// RNG seed
    #[arg(long, default_value_t = 42, env = "TRANSHAZ_SEED")]
    seed: u64,

    /// Covariate column carrying the truncated prior (default: the first)
    #[arg(long = "constrained-covariate", env = "TRANSHAZ_CONSTRAINED_COVARIATE")]
    constrained_covariate: Option<String>,

    /// Initial log-scale proposal SD for the baseline levels
    #[arg(long = "metropolis-step", default_value_t = 0.5, env = "TRANSHAZ_METROPOLIS_STEP")]
    metropolis_step: f64,

    /// Sweeps between proposal-scale adaptations during burn-in
    #[arg(long = "adapt-window", default_value_t = 50, env = "TRANSHAZ_ADAPT_WINDOW")]
    adapt_window: usize,

    /// Starting envelope abscissae for the coefficient updates
    #[arg(long = "ars-init-points", default_value_t = 5, env = "TRANSHAZ_ARS_INIT_POINTS")]
    ars_init_points: usize,
}

impl ChainArgs {
    fn to_spec(&self) -> Result<ChainSpec, CliError> {
        Ok(ChainSpec {
            sigma: parse_f64_list(&self.sigma, "--sigma")?,
            alpha: self.alpha,
            xi: self.xi,
            burn_in: self.burn_in,
            thin: self.thin,
            samples: self.samples,
            seed: self.seed,
            metropolis_step: self.metropolis_step,
            adapt_window: self.adapt_window,
            ars_init_points: self.ars_init_points,
            constrained_covariate: self.constrained_covariate.clone(),
        })
    }
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV with columns time,status,<covariates...>
    #[arg(long, env = "TRANSHAZ_DATA")]
    data: PathBuf,

    /// Transformation index in [0, 1]; 0 multiplicative, 1 additive
    #[arg(long, env = "TRANSHAZ_GAMMA")]
    gamma: f64,

    /// Number of baseline intervals J
    #[arg(long, env = "TRANSHAZ_INTERVALS")]
    intervals: usize,

    #[command(flatten)]
    chain: ChainArgs,

    /// Output directory
    #[arg(long, default_value = ".", env = "TRANSHAZ_OUT")]
    out: PathBuf,

    /// Write per-sweep JSON trace records to this path
    #[arg(long, env = "TRANSHAZ_TRACE")]
    trace: Option<PathBuf>,

    /// Covariate profile for predictive survival/hazard curves, comma list
    #[arg(long = "survival-profile", env = "TRANSHAZ_SURVIVAL_PROFILE")]
    survival_profile: Option<String>,

    /// Query times for the predictive curves, comma list
    #[arg(long = "survival-times", env = "TRANSHAZ_SURVIVAL_TIMES")]
    survival_times: Option<String>,

    /// Emit Nelson-Aalen cumulative hazards grouped by this covariate
    #[arg(long = "nelson-aalen", env = "TRANSHAZ_NELSON_AALEN")]
    nelson_aalen: Option<String>,
}

#[derive(Args)]
struct SelectArgs {
    /// Input CSV with columns time,status,<covariates...>
    #[arg(long, env = "TRANSHAZ_DATA")]
    data: PathBuf,

    /// Transformation indices to scan, comma list
    #[arg(long, default_value = "0,0.25,0.5,0.75,1", env = "TRANSHAZ_GAMMAS")]
    gammas: String,

    /// Interval counts to scan, comma list
    #[arg(long = "intervals-list", default_value = "1,5,10", env = "TRANSHAZ_INTERVALS_LIST")]
    intervals_list: String,

    #[command(flatten)]
    chain: ChainArgs,

    /// Maximum concurrent grid cells
    #[arg(long, env = "TRANSHAZ_JOBS")]
    jobs: Option<usize>,

    /// Output directory
    #[arg(long, default_value = ".", env = "TRANSHAZ_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of subjects
    #[arg(long, default_value_t = 300, env = "TRANSHAZ_N")]
    n: usize,

    /// Generating transformation index
    #[arg(long, default_value_t = 0.5, env = "TRANSHAZ_GAMMA_TRUE")]
    gamma: f64,

    /// Constant baseline hazard level
    #[arg(long, default_value_t = 0.5, env = "TRANSHAZ_LAMBDA0")]
    lambda0: f64,

    /// True coefficients, comma list
    #[arg(long, default_value = "0.7,1", env = "TRANSHAZ_BETA")]
    beta: String,

    /// Covariate generators: normal(mean,sd) or binary(a,b,prob_a), comma
    /// separated at the top level
    #[arg(long, default_value = "normal(5,1),binary(1,2,0.5)", env = "TRANSHAZ_COVARIATES")]
    covariates: String,

    /// Target censoring rate in (0,1), or `none`
    #[arg(long, default_value = "0.25", env = "TRANSHAZ_CENSORING")]
    censoring: String,

    /// RNG seed
    #[arg(long, default_value_t = 42, env = "TRANSHAZ_SEED")]
    seed: u64,

    /// Output directory
    #[arg(long, default_value = ".", env = "TRANSHAZ_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Samples CSV produced by `fit`
    #[arg(long, env = "TRANSHAZ_SAMPLES_FILE")]
    samples: PathBuf,

    /// Optional trace file for acceptance-rate summaries
    #[arg(long, env = "TRANSHAZ_TRACE")]
    trace: Option<PathBuf>,

    /// Early window fraction
    #[arg(long = "window-early", default_value_t = 0.1, env = "TRANSHAZ_WINDOW_EARLY")]
    window_early: f64,

    /// Late window fraction
    #[arg(long = "window-late", default_value_t = 0.5, env = "TRANSHAZ_WINDOW_LATE")]
    window_late: f64,

    /// Output directory
    #[arg(long, default_value = ".", env = "TRANSHAZ_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct RerunArgs {
    /// Manifest recorded by a previous run
    #[arg(long, env = "TRANSHAZ_MANIFEST")]
    manifest: PathBuf,
}

fn parse_f64_list(raw: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Validation(format!("{flag}: '{s}' is not a number")))
        })
        .collect()
}

fn parse_usize_list(raw: &str, flag: &str) -> Result<Vec<usize>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Validation(format!("{flag}: '{s}' is not a count")))
        })
        .collect()
}

/// Splits a generator list on top-level commas only, so `normal(5,1)` stays
/// intact.
fn parse_covariates(raw: &str) -> Result<Vec<CovariateSpec>, CliError> {
    let mut specs = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut pieces = Vec::new();
    for (i, c) in raw.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth = depth.checked_sub(1).ok_or_else(|| {
                    CliError::Validation(format!("--covariates: unbalanced ')' in '{raw}'"))
                })?
            }
            ',' if depth == 0 => {
                pieces.push(&raw[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    pieces.push(&raw[start..]);
    for piece in pieces {
        let piece = piece.trim();
        let (kind, args) = piece
            .split_once('(')
            .and_then(|(k, rest)| rest.strip_suffix(')').map(|a| (k.trim(), a)))
            .ok_or_else(|| {
                CliError::Validation(format!(
                    "--covariates: '{piece}' is not normal(mean,sd) or binary(a,b,prob_a)"
                ))
            })?;
        let numbers = parse_f64_list(args, "--covariates")?;
        match (kind, numbers.as_slice()) {
            ("normal", [mean, sd]) => specs.push(CovariateSpec::Normal { mean: *mean, sd: *sd }),
            ("binary", [a, b, prob_a]) => {
                specs.push(CovariateSpec::Binary { a: *a, b: *b, prob_a: *prob_a })
            }
            _ => {
                return Err(CliError::Validation(format!(
                    "--covariates: '{piece}' is not normal(mean,sd) or binary(a,b,prob_a)"
                )))
            }
        }
    }
    Ok(specs)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(args) => {
            let spec = FitSpec {
                data: args.data,
                gamma: args.gamma,
                intervals: args.intervals,
                chain: args.chain.to_spec()?,
                out: args.out,
                trace: args.trace,
                survival_profile: args
                    .survival_profile
                    .as_deref()
                    .map(|s| parse_f64_list(s, "--survival-profile"))
                    .transpose()?,
                survival_times: args
                    .survival_times
                    .as_deref()
                    .map(|s| parse_f64_list(s, "--survival-times"))
                    .transpose()?,
                nelson_aalen_by: args.nelson_aalen,
            };
            runner::run_fit(&spec)
        }
        Command::Select(args) => {
            let spec = SelectSpec {
                data: args.data,
                gammas: parse_f64_list(&args.gammas, "--gammas")?,
                intervals_list: parse_usize_list(&args.intervals_list, "--intervals-list")?,
                chain: args.chain.to_spec()?,
                jobs: args.jobs,
                out: args.out,
            };
            runner::run_select(&spec)
        }
        Command::Simulate(args) => {
            let censoring = match args.censoring.trim() {
                "none" => Censoring::None,
                rate => Censoring::TargetRate(rate.parse::<f64>().map_err(|_| {
                    CliError::Validation(format!(
                        "--censoring: '{rate}' is neither a rate in (0,1) nor 'none'"
                    ))
                })?),
            };
            let spec = SimulateSpec {
                n: args.n,
                gamma: args.gamma,
                lambda0: args.lambda0,
                beta: parse_f64_list(&args.beta, "--beta")?,
                covariates: parse_covariates(&args.covariates)?,
                censoring,
                seed: args.seed,
                out: args.out,
            };
            runner::run_simulate(&spec)
        }
        Command::Diagnose(args) => {
            let spec = DiagnoseSpec {
                samples: args.samples,
                trace: args.trace,
                out: args.out,
                window_early: args.window_early,
                window_late: args.window_late,
            };
            runner::run_diagnose(&spec)
        }
        Command::Rerun(args) => runner::run_from_manifest(&args.manifest),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

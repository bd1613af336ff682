//! Resolved command specifications and their executors. Each `*Spec` is
//! what the manifest records; `rerun` deserializes one and calls the same
//! executor again.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use transhaz::data::{
    build_partition, read_dataset_path, read_samples_csv, simulate, summary_config,
    write_cumulative_hazard_csv, write_dataset_csv, write_grid_csv, write_hazard_csv,
    write_outputs, write_survival_csv, Censoring, CovariateSpec,
    SimulationSpec, SummaryDiagnostics, SummaryDoc, SummaryFit,
};
use transhaz::inference::{hazard_curve, nelson_aalen, predict_survival_curve, summarize};
use transhaz::model::{ModelConfig, SurvivalDataset};
use transhaz::sampler::{
    geweke_diagnostic, geweke_z, run_chain_traced, GewekeEntry, JsonTraceSink, SamplerSettings,
    TraceSink,
};
use transhaz::selection::{fit_statistics, run_grid};

use crate::manifest::RunManifest;

/// Failure category, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad inputs or configuration: exit 2.
    Validation(String),
    /// Sampler initialization failure: exit 3.
    Init(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Init(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Init(m) => m,
        }
    }
}

impl From<transhaz::Error> for CliError {
    fn from(e: transhaz::Error) -> Self {
        match e {
            transhaz::Error::Init(m) => CliError::Init(m),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("I/O error: {e}"))
    }
}

/// Prior and chain-length settings shared by `fit` and `select`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainSpec {
    pub sigma: Vec<f64>,
    pub alpha: f64,
    pub xi: f64,
    pub burn_in: usize,
    pub thin: usize,
    pub samples: usize,
    pub seed: u64,
    pub metropolis_step: f64,
    pub adapt_window: usize,
    pub ars_init_points: usize,
    pub constrained_covariate: Option<String>,
}

impl ChainSpec {
    fn settings(&self) -> SamplerSettings {
        SamplerSettings {
            burn_in: self.burn_in,
            thin: self.thin,
            samples: self.samples,
            seed: self.seed,
            metropolis_step: self.metropolis_step,
            adapt_window: self.adapt_window,
            ars_init_points: self.ars_init_points,
        }
    }

    fn config(&self, data: &SurvivalDataset, gamma: f64, intervals: usize) -> Result<ModelConfig, CliError> {
        let constrained = match &self.constrained_covariate {
            None => 0,
            Some(name) => data.covariate_index(name).ok_or_else(|| {
                CliError::Validation(format!(
                    "unknown covariate '{}'; available: {}",
                    name,
                    data.covariate_names().join(", ")
                ))
            })?,
        };
        let sigma = match self.sigma.len() {
            1 => vec![self.sigma[0]; data.p()],
            n if n == data.p() => self.sigma.clone(),
            n => {
                return Err(CliError::Validation(format!(
                    "{} prior standard deviations for {} covariates",
                    n,
                    data.p()
                )))
            }
        };
        Ok(ModelConfig { gamma, intervals, constrained, sigma, alpha: self.alpha, xi: self.xi })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSpec {
    pub data: PathBuf,
    pub gamma: f64,
    pub intervals: usize,
    pub chain: ChainSpec,
    pub out: PathBuf,
    pub trace: Option<PathBuf>,
    pub survival_profile: Option<Vec<f64>>,
    pub survival_times: Option<Vec<f64>>,
    pub nelson_aalen_by: Option<String>,
}

pub fn run_fit(spec: &FitSpec) -> Result<(), CliError> {
    let started = chrono::Utc::now().to_rfc3339();
    let data = read_dataset_path(&spec.data)?;
    let config = spec.chain.config(&data, spec.gamma, spec.intervals)?;
    let settings = spec.chain.settings();
    let partition = build_partition(&data, spec.intervals)?;

    std::fs::create_dir_all(&spec.out)?;
    let mut trace_sink = match &spec.trace {
        Some(path) => Some(JsonTraceSink::new(BufWriter::new(File::create(path)?))),
        None => None,
    };
    let chain = run_chain_traced(
        &data,
        &partition,
        &config,
        &settings,
        trace_sink.as_mut().map(|s| s as &mut dyn TraceSink),
    )?;
    drop(trace_sink);

    let stats = fit_statistics(&chain, &data, &partition)?;
    let summary = summarize(&chain, 0.95)?;
    let geweke = geweke_diagnostic(&chain, 0.1, 0.5).ok();
    let doc = SummaryDoc {
        config: summary_config(&config, &settings, partition.cuts(), data.covariate_names()),
        summaries: summary.rows,
        fit: SummaryFit {
            b: stats.b,
            dic: stats.dic,
            dev_mean: stats.dev_mean,
            dev_at_mean: stats.dev_at_mean,
        },
        diagnostics: SummaryDiagnostics {
            geweke_z: match &geweke {
                Some(report) => report.entries.iter().map(|e| e.z()).collect(),
                None => Vec::new(),
            },
        },
    };
    write_outputs(&spec.out, &chain, &doc)?;

    if let Some(profile) = &spec.survival_profile {
        // defaults: survival at the cut points (step endpoints, plot-ready),
        // hazard at the interval midpoints (tabular)
        let times = spec
            .survival_times
            .clone()
            .unwrap_or_else(|| partition.cuts().to_vec());
        let curve = predict_survival_curve(&chain, profile, &times, &partition)?;
        write_survival_csv(BufWriter::new(File::create(spec.out.join("survival.csv"))?), &curve)?;
        let hazard_times: Vec<f64> = match &spec.survival_times {
            Some(times) => times.iter().copied().filter(|t| *t > 0.0).collect(),
            None => partition
                .cuts()
                .windows(2)
                .map(|w| 0.5 * (w[0] + w[1]))
                .collect(),
        };
        let hazards = hazard_curve(&chain, profile, &hazard_times, &partition)?;
        write_hazard_csv(
            BufWriter::new(File::create(spec.out.join("hazard.csv"))?),
            &hazard_times,
            &hazards,
        )?;
    }
    if let Some(column) = &spec.nelson_aalen_by {
        let idx = data.covariate_index(column).ok_or_else(|| {
            CliError::Validation(format!("unknown covariate '{}' for grouping", column))
        })?;
        let mut labels: Vec<String> = Vec::new();
        let mut group_of = Vec::with_capacity(data.n());
        for i in 0..data.n() {
            let value = format!("{}={}", column, data.covariate_row(i)[idx]);
            let g = match labels.iter().position(|l| l == &value) {
                Some(g) => g,
                None => {
                    labels.push(value);
                    labels.len() - 1
                }
            };
            group_of.push(g);
        }
        let curves = nelson_aalen(&data, &group_of, &labels)?;
        write_cumulative_hazard_csv(
            BufWriter::new(File::create(spec.out.join("nelson_aalen.csv"))?),
            &curves,
        )?;
    }

    RunManifest::new("fit", spec, Some(spec.chain.seed), &[spec.data.as_path()], started)?
        .finish_and_write(&spec.out)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectSpec {
    pub data: PathBuf,
    pub gammas: Vec<f64>,
    pub intervals_list: Vec<usize>,
    pub chain: ChainSpec,
    pub jobs: Option<usize>,
    pub out: PathBuf,
}

pub fn run_select(spec: &SelectSpec) -> Result<(), CliError> {
    let started = chrono::Utc::now().to_rfc3339();
    let data = read_dataset_path(&spec.data)?;
    let base = spec.chain.config(&data, 0.0, 1)?;
    let settings = spec.chain.settings();

    let grid = match spec.jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            pool.install(|| run_grid(&data, &spec.gammas, &spec.intervals_list, &base, &settings))?
        }
        None => run_grid(&data, &spec.gammas, &spec.intervals_list, &base, &settings)?,
    };

    let succeeded = grid.cells.iter().filter(|c| c.stats().is_some()).count();
    if succeeded == 0 {
        return Err(CliError::Init("every grid cell failed".into()));
    }
    std::fs::create_dir_all(&spec.out)?;
    write_grid_csv(BufWriter::new(File::create(spec.out.join("grid.csv"))?), &grid)?;
    RunManifest::new("select", spec, Some(spec.chain.seed), &[spec.data.as_path()], started)?
        .finish_and_write(&spec.out)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSpec {
    pub n: usize,
    pub gamma: f64,
    pub lambda0: f64,
    pub beta: Vec<f64>,
    pub covariates: Vec<CovariateSpec>,
    pub censoring: Censoring,
    pub seed: u64,
    pub out: PathBuf,
}

/// The manifest augments the generator spec with the calibrated bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SimulateManifestConfig {
    #[serde(flatten)]
    spec: SimulateSpec,
    censoring_bound: Option<f64>,
    analytic_censoring_rate: Option<f64>,
    empirical_censoring_rate: f64,
    covariate_redraws: usize,
}

pub fn run_simulate(spec: &SimulateSpec) -> Result<(), CliError> {
    let started = chrono::Utc::now().to_rfc3339();
    let generator = SimulationSpec {
        n: spec.n,
        gamma: spec.gamma,
        lambda0: spec.lambda0,
        beta: spec.beta.clone(),
        covariates: spec.covariates.clone(),
        censoring: spec.censoring,
        seed: spec.seed,
    };
    let (data, report) = simulate(&generator)?;
    std::fs::create_dir_all(&spec.out)?;
    write_dataset_csv(BufWriter::new(File::create(spec.out.join("dataset.csv"))?), &data)?;
    let config = SimulateManifestConfig {
        spec: spec.clone(),
        censoring_bound: report.censoring_bound,
        analytic_censoring_rate: report.analytic_censoring_rate,
        empirical_censoring_rate: report.empirical_censoring_rate,
        covariate_redraws: report.redraws,
    };
    RunManifest::new("simulate", &config, Some(spec.seed), &[], started)?
        .finish_and_write(&spec.out)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnoseSpec {
    pub samples: PathBuf,
    pub trace: Option<PathBuf>,
    pub out: PathBuf,
    pub window_early: f64,
    pub window_late: f64,
}

#[derive(Debug, Serialize)]
struct DiagnoseReport {
    parameters: Vec<DiagnoseEntry>,
    acceptance: Option<AcceptanceSummary>,
}

#[derive(Debug, Serialize)]
struct DiagnoseEntry {
    name: String,
    geweke_z: Option<f64>,
    constant: bool,
}

#[derive(Debug, Serialize)]
struct AcceptanceSummary {
    iterations: usize,
    lambda_acceptance: Vec<f64>,
    ars_fallback_rate: Vec<f64>,
}

fn trace_acceptance(path: &Path) -> Result<AcceptanceSummary, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut iterations = 0usize;
    let mut lambda_totals: Vec<u64> = Vec::new();
    let mut fallback_totals: Vec<u64> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| CliError::Validation(format!("malformed trace line: {e}")))?;
        iterations += 1;
        if let Some(flags) = value["lambda_accepted"].as_array() {
            lambda_totals.resize(flags.len().max(lambda_totals.len()), 0);
            for (j, f) in flags.iter().enumerate() {
                if f.as_bool() == Some(true) {
                    lambda_totals[j] += 1;
                }
            }
        }
        if let Some(flags) = value["ars_fallback"].as_array() {
            fallback_totals.resize(flags.len().max(fallback_totals.len()), 0);
            for (m, f) in flags.iter().enumerate() {
                if f.as_bool() == Some(true) {
                    fallback_totals[m] += 1;
                }
            }
        }
    }
    if iterations == 0 {
        return Err(CliError::Validation("trace file has no records".into()));
    }
    Ok(AcceptanceSummary {
        iterations,
        lambda_acceptance: lambda_totals
            .iter()
            .map(|&a| a as f64 / iterations as f64)
            .collect(),
        ars_fallback_rate: fallback_totals
            .iter()
            .map(|&a| a as f64 / iterations as f64)
            .collect(),
    })
}

pub fn run_diagnose(spec: &DiagnoseSpec) -> Result<(), CliError> {
    let started = chrono::Utc::now().to_rfc3339();
    let table = read_samples_csv(File::open(&spec.samples)?)?;
    if table.is_empty() {
        return Err(CliError::Validation("samples file has no rows".into()));
    }
    let mut parameters = Vec::new();
    for (name, series) in table.columns.iter().zip(&table.series) {
        if name == "loglik" {
            continue;
        }
        let entry = geweke_z(series, spec.window_early, spec.window_late)?;
        parameters.push(DiagnoseEntry {
            name: name.clone(),
            geweke_z: entry.z(),
            constant: matches!(entry, GewekeEntry::Constant),
        });
    }
    let acceptance = match &spec.trace {
        Some(path) => Some(trace_acceptance(path)?),
        None => None,
    };
    let report = DiagnoseReport { parameters, acceptance };
    std::fs::create_dir_all(&spec.out)?;
    let mut file = BufWriter::new(File::create(spec.out.join("diagnostics.json"))?);
    serde_json::to_writer_pretty(&mut file, &report)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    file.flush()?;
    let mut inputs: Vec<&Path> = vec![spec.samples.as_path()];
    if let Some(trace) = &spec.trace {
        inputs.push(trace.as_path());
    }
    RunManifest::new("diagnose", spec, None, &inputs, started)?.finish_and_write(&spec.out)?;
    Ok(())
}

pub fn run_from_manifest(path: &Path) -> Result<(), CliError> {
    let manifest = crate::manifest::read_manifest(path)?;
    match manifest.command.as_str() {
        "fit" => run_fit(&parse_config(manifest.config)?),
        "select" => run_select(&parse_config(manifest.config)?),
        "simulate" => {
            // the simulate manifest embeds the report fields; the spec fields
            // deserialize directly thanks to the flattened layout
            run_simulate(&parse_config(manifest.config)?)
        }
        "diagnose" => run_diagnose(&parse_config(manifest.config)?),
        other => Err(CliError::Validation(format!("manifest records unknown command '{other}'"))),
    }
}

fn parse_config<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T, CliError> {
    serde_json::from_value(value)
        .map_err(|e| CliError::Validation(format!("manifest config does not match: {e}")))
}

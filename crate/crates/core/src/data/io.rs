//! Delimited-file ingestion and output artifact writers.
//!
//! Input CSV: comma-separated, UTF-8, header required, columns `time`,
//! `status` (0 = censored, 1 = event) and at least one covariate column.
//! Samples CSV rows carry 17 significant digits so rereading reproduces the
//! draws bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{CumulativeHazardCurve, ParameterSummary, SurvivalPrediction};
use crate::model::{ModelConfig, ParameterState, SurvivalDataset};
use crate::sampler::{ChainOutput, GewekeReport, SamplerSettings};
use crate::selection::{CellOutcome, GridResult};

/// 17 significant digits: lossless decimal form for an f64.
fn decimal17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Reads a dataset from delimited text (see the module docs for the schema).
pub fn read_dataset<R: Read>(reader: R) -> Result<SurvivalDataset> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv.headers()?.clone();
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    let time_col = names
        .iter()
        .position(|h| h == "time")
        .ok_or_else(|| Error::Format("missing required column 'time'".into()))?;
    let status_col = names
        .iter()
        .position(|h| h == "status")
        .ok_or_else(|| Error::Format("missing required column 'status'".into()))?;
    let covariate_cols: Vec<usize> =
        (0..names.len()).filter(|&c| c != time_col && c != status_col).collect();
    if covariate_cols.is_empty() {
        return Err(Error::Format("at least one covariate column required".into()));
    }

    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut rows = Vec::new();
    for (idx, record) in csv.records().enumerate() {
        let row_no = idx + 1;
        let record = record?;
        if record.len() != names.len() {
            return Err(Error::Ingestion {
                row: row_no,
                message: format!("{} fields, expected {}", record.len(), names.len()),
            });
        }
        let parse = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("").trim();
            if raw.is_empty() {
                return Err(Error::Ingestion {
                    row: row_no,
                    message: format!("missing value in column '{}'", names[col]),
                });
            }
            raw.parse::<f64>().map_err(|_| Error::Ingestion {
                row: row_no,
                message: format!("non-numeric value '{}' in column '{}'", raw, names[col]),
            })
        };
        let time = parse(time_col)?;
        if !time.is_finite() || time < 0.0 {
            return Err(Error::Ingestion {
                row: row_no,
                message: format!("negative or non-finite time {}", time),
            });
        }
        let status = parse(status_col)?;
        let event = if status == 1.0 {
            true
        } else if status == 0.0 {
            false
        } else {
            return Err(Error::Ingestion {
                row: row_no,
                message: format!("status {} outside {{0, 1}}", status),
            });
        };
        let mut row = Vec::with_capacity(covariate_cols.len());
        for &c in &covariate_cols {
            let v = parse(c)?;
            if !v.is_finite() {
                return Err(Error::Ingestion {
                    row: row_no,
                    message: format!("non-finite covariate in column '{}'", names[c]),
                });
            }
            row.push(v);
        }
        times.push(time);
        events.push(event);
        rows.push(row);
    }
    if times.is_empty() {
        return Err(Error::Format("no data rows".into()));
    }
    if !events.iter().any(|&e| e) {
        return Err(Error::Format("at least one event required".into()));
    }
    let covariate_names = covariate_cols.iter().map(|&c| names[c].clone()).collect();
    SurvivalDataset::new(times, events, rows, covariate_names)
}

pub fn read_dataset_path<P: AsRef<Path>>(path: P) -> Result<SurvivalDataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

/// Writes a dataset in the input schema. Values use the shortest decimal
/// form that round-trips.
pub fn write_dataset_csv<W: Write>(mut w: W, data: &SurvivalDataset) -> Result<()> {
    write!(w, "time,status")?;
    for name in data.covariate_names() {
        write!(w, ",{}", name)?;
    }
    writeln!(w)?;
    for i in 0..data.n() {
        write!(w, "{},{}", data.time(i), u8::from(data.is_event(i)))?;
        for v in data.covariate_row(i) {
            write!(w, ",{}", v)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes retained draws as `iter,beta_1..beta_p,lambda_1..lambda_J,loglik`
/// with 17 significant digits per value.
pub fn write_samples_csv<W: Write>(mut w: W, chain: &ChainOutput) -> Result<()> {
    write!(w, "iter")?;
    for name in chain.parameter_names() {
        write!(w, ",{}", name)?;
    }
    writeln!(w, ",loglik")?;
    for (m, draw) in chain.draws.iter().enumerate() {
        write!(w, "{}", m + 1)?;
        for v in draw.beta.iter().chain(&draw.lambda) {
            write!(w, ",{}", decimal17(*v))?;
        }
        writeln!(w, ",{}", decimal17(chain.loglik[m]))?;
    }
    Ok(())
}

/// Parameter columns reread from a samples CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    /// Column names excluding `iter`, ending with `loglik`.
    pub columns: Vec<String>,
    /// Column-major values, one vector per column.
    pub series: Vec<Vec<f64>>,
}

impl SampleTable {
    /// Number of retained draws.
    pub fn len(&self) -> usize {
        self.series.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reassembles parameter states (dropping `loglik`) when the column
    /// layout matches `beta_*`, `lambda_*`.
    pub fn states(&self) -> Result<(Vec<ParameterState>, Vec<f64>)> {
        let p = self.columns.iter().filter(|c| c.starts_with("beta_")).count();
        let j = self.columns.iter().filter(|c| c.starts_with("lambda_")).count();
        if p + j + 1 != self.columns.len() || self.columns.last().map(String::as_str) != Some("loglik") {
            return Err(Error::Format("unexpected samples column layout".into()));
        }
        let mut states = Vec::with_capacity(self.len());
        for m in 0..self.len() {
            let beta = (0..p).map(|c| self.series[c][m]).collect();
            let lambda = (p..p + j).map(|c| self.series[c][m]).collect();
            states.push(ParameterState::new(beta, lambda));
        }
        Ok((states, self.series[p + j].clone()))
    }
}

/// Rereads a samples CSV written by [`write_samples_csv`].
pub fn read_samples_csv<R: Read>(reader: R) -> Result<SampleTable> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv.headers()?.clone();
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    if names.first().map(String::as_str) != Some("iter") {
        return Err(Error::Format("samples file must start with an 'iter' column".into()));
    }
    let columns: Vec<String> = names[1..].to_vec();
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
    for (idx, record) in csv.records().enumerate() {
        let record = record?;
        if record.len() != names.len() {
            return Err(Error::Ingestion {
                row: idx + 1,
                message: format!("{} fields, expected {}", record.len(), names.len()),
            });
        }
        for (c, slot) in series.iter_mut().enumerate() {
            let raw = record.get(c + 1).unwrap_or("").trim();
            let v = raw.parse::<f64>().map_err(|_| Error::Ingestion {
                row: idx + 1,
                message: format!("non-numeric value '{}' in column '{}'", raw, columns[c]),
            })?;
            slot.push(v);
        }
    }
    Ok(SampleTable { columns, series })
}

/// Resolved configuration echoed into the summary document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryConfig {
    pub gamma: f64,
    pub intervals: usize,
    pub constrained_covariate: String,
    pub sigma: Vec<f64>,
    pub alpha: f64,
    pub xi: f64,
    pub burn_in: usize,
    pub thin: usize,
    pub samples: usize,
    pub seed: u64,
    pub cut_points: Vec<f64>,
    pub covariate_names: Vec<String>,
}

/// Fit-statistics block of the summary document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFit {
    pub b: f64,
    pub dic: f64,
    pub dev_mean: f64,
    pub dev_at_mean: f64,
}

/// Diagnostics block: one z-score per parameter, `null` where the chain was
/// constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDiagnostics {
    pub geweke_z: Vec<Option<f64>>,
}

impl From<&GewekeReport> for SummaryDiagnostics {
    fn from(report: &GewekeReport) -> Self {
        Self { geweke_z: report.entries.iter().map(|e| e.z()).collect() }
    }
}

/// The summary JSON document: configuration, per-parameter posterior
/// summaries, fit statistics, and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub config: SummaryConfig,
    pub summaries: Vec<ParameterSummary>,
    pub fit: SummaryFit,
    pub diagnostics: SummaryDiagnostics,
}

pub fn write_summary_json<W: Write>(w: W, doc: &SummaryDoc) -> Result<()> {
    serde_json::to_writer_pretty(w, doc)?;
    Ok(())
}

/// Grid CSV: `gamma,J,B,DIC,status`. Failed cells leave B and DIC empty.
pub fn write_grid_csv<W: Write>(mut w: W, grid: &GridResult) -> Result<()> {
    writeln!(w, "gamma,J,B,DIC,status")?;
    for (idx, cell) in grid.cells.iter().enumerate() {
        match &cell.outcome {
            CellOutcome::Fit { stats, .. } => {
                let status = match (grid.best_by_b == Some(idx), grid.best_by_dic == Some(idx)) {
                    (true, true) => "best_by_B_and_DIC".to_string(),
                    (true, false) => "best_by_B".to_string(),
                    (false, true) => "best_by_DIC".to_string(),
                    (false, false) => "ok".to_string(),
                };
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    cell.gamma,
                    cell.intervals,
                    decimal17(stats.b),
                    decimal17(stats.dic),
                    status
                )?;
            }
            CellOutcome::Failed { message } => {
                let sanitized = message.replace([',', '\n'], ";");
                writeln!(w, "{},{},,,failed: {}", cell.gamma, cell.intervals, sanitized)?;
            }
        }
    }
    Ok(())
}

/// Survival curve CSV: `time,survival`.
pub fn write_survival_csv<W: Write>(mut w: W, curve: &SurvivalPrediction) -> Result<()> {
    writeln!(w, "time,survival")?;
    for (t, s) in curve.times.iter().zip(&curve.survival) {
        writeln!(w, "{},{}", t, decimal17(*s))?;
    }
    Ok(())
}

/// Hazard curve CSV: `time,hazard`.
pub fn write_hazard_csv<W: Write>(mut w: W, times: &[f64], hazard: &[f64]) -> Result<()> {
    writeln!(w, "time,hazard")?;
    for (t, h) in times.iter().zip(hazard) {
        writeln!(w, "{},{}", t, decimal17(*h))?;
    }
    Ok(())
}

/// Cumulative-hazard curves CSV: `group,time,cumulative_hazard`.
pub fn write_cumulative_hazard_csv<W: Write>(
    mut w: W,
    curves: &[CumulativeHazardCurve],
) -> Result<()> {
    writeln!(w, "group,time,cumulative_hazard")?;
    for curve in curves {
        for (t, h) in curve.times.iter().zip(&curve.cumulative_hazard) {
            writeln!(w, "{},{},{}", curve.label, t, decimal17(*h))?;
        }
    }
    Ok(())
}

/// Builds the summary-document configuration block.
pub fn summary_config(
    config: &ModelConfig,
    settings: &SamplerSettings,
    cut_points: &[f64],
    covariate_names: &[String],
) -> SummaryConfig {
    let constrained_covariate = covariate_names
        .get(config.constrained)
        .cloned()
        .unwrap_or_default();
    SummaryConfig {
        gamma: config.gamma,
        intervals: config.intervals,
        constrained_covariate,
        sigma: config.sigma.clone(),
        alpha: config.alpha,
        xi: config.xi,
        burn_in: settings.burn_in,
        thin: settings.thin,
        samples: settings.samples,
        seed: settings.seed,
        cut_points: cut_points.to_vec(),
        covariate_names: covariate_names.to_vec(),
    }
}

/// Writes the standard fit artifacts (`samples.csv`, `summary.json`) into a
/// directory and returns the paths written.
pub fn write_outputs(dir: &Path, chain: &ChainOutput, summary: &SummaryDoc) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let samples_path = dir.join("samples.csv");
    write_samples_csv(BufWriter::new(File::create(&samples_path)?), chain)?;
    let summary_path = dir.join("summary.json");
    write_summary_json(BufWriter::new(File::create(&summary_path)?), summary)?;
    Ok(vec![samples_path, summary_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimePartition;
    use crate::sampler::run_chain;
    use crate::selection::GridCell;

    #[test]
    fn read_well_formed_file() {
        let csv = "time,status,age,sex\n1.5,1,47.0,1\n2.0,0,52.5,2\n0.7,1,39.1,1\n";
        let data = read_dataset(csv.as_bytes()).unwrap();
        assert_eq!(data.n(), 3);
        assert_eq!(data.p(), 2);
        assert_eq!(data.covariate_names(), &["age".to_string(), "sex".to_string()]);
        assert!(data.is_event(0));
        assert!(!data.is_event(1));
    }

    #[test]
    fn negative_time_names_the_row() {
        let csv = "time,status,z\n1.0,1,2.0\n-1.0,1,2.0\n";
        let err = read_dataset(csv.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn all_censored_file_is_rejected() {
        let csv = "time,status,z\n1.0,0,2.0\n2.0,0,2.0\n";
        let err = read_dataset(csv.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("at least one event"), "{err}");
    }

    #[test]
    fn bad_status_missing_value_and_non_numeric_rows_are_flagged() {
        let err = read_dataset("time,status,z\n1.0,2,2.0\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("status"), "{err}");
        let err = read_dataset("time,status,z\n1.0,1,\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");
        let err = read_dataset("time,status,z\n1.0,1,abc\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("non-numeric"), "{err}");
    }

    #[test]
    fn missing_required_columns() {
        assert!(read_dataset("t,status,z\n1,1,1\n".as_bytes()).is_err());
        assert!(read_dataset("time,s,z\n1,1,1\n".as_bytes()).is_err());
        assert!(read_dataset("time,status\n1,1\n".as_bytes()).is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let csv = "time,status,age\n1.5,1,47.25\n2.0,0,52.125\n";
        let data = read_dataset(csv.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_dataset_csv(&mut out, &data).unwrap();
        let back = read_dataset(out.as_slice()).unwrap();
        assert_eq!(data, back);
    }

    fn small_chain() -> (ChainOutput, SurvivalDataset, TimePartition) {
        let data = SurvivalDataset::new(
            vec![1.0, 2.0, 0.5],
            vec![true, true, true],
            vec![vec![1.0], vec![2.0], vec![1.5]],
            vec!["z".into()],
        )
        .unwrap();
        let part = TimePartition::new(vec![0.0, 2.5]).unwrap();
        let config = ModelConfig {
            gamma: 0.5,
            intervals: 1,
            constrained: 0,
            sigma: vec![100.0],
            alpha: 2.0,
            xi: 0.01,
        };
        let settings = SamplerSettings {
            burn_in: 10,
            thin: 1,
            samples: 25,
            ..SamplerSettings::default()
        };
        let chain = run_chain(&data, &part, &config, &settings).unwrap();
        (chain, data, part)
    }

    #[test]
    fn samples_round_trip_is_bit_exact() {
        let (chain, _, _) = small_chain();
        let mut out = Vec::new();
        write_samples_csv(&mut out, &chain).unwrap();
        let table = read_samples_csv(out.as_slice()).unwrap();
        assert_eq!(table.columns, vec!["beta_1", "lambda_1", "loglik"]);
        let (states, loglik) = table.states().unwrap();
        assert_eq!(states.len(), chain.len());
        for (a, b) in states.iter().zip(&chain.draws) {
            assert_eq!(a.beta[0].to_bits(), b.beta[0].to_bits());
            assert_eq!(a.lambda[0].to_bits(), b.lambda[0].to_bits());
        }
        for (a, b) in loglik.iter().zip(&chain.loglik) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn write_outputs_places_artifacts_in_the_directory() {
        let (chain, data, part) = small_chain();
        let summary = crate::inference::summarize(&chain, 0.95).unwrap();
        let doc = SummaryDoc {
            config: summary_config(
                &chain.config,
                &chain.settings,
                part.cuts(),
                data.covariate_names(),
            ),
            summaries: summary.rows,
            fit: SummaryFit { b: -1.0, dic: 2.0, dev_mean: 1.0, dev_at_mean: 0.0 },
            diagnostics: SummaryDiagnostics { geweke_z: vec![None] },
        };
        let dir = tempfile::tempdir().unwrap();
        let paths = write_outputs(dir.path(), &chain, &doc).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(dir.path().join("samples.csv").exists());
        assert!(dir.path().join("summary.json").exists());
        let table = read_samples_csv(File::open(dir.path().join("samples.csv")).unwrap()).unwrap();
        assert_eq!(table.len(), chain.len());
    }

    #[test]
    fn empty_grid_writes_header_only() {
        let grid = GridResult { cells: Vec::new(), best_by_b: None, best_by_dic: None };
        let mut out = Vec::new();
        write_grid_csv(&mut out, &grid).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "gamma,J,B,DIC,status\n");
    }

    #[test]
    fn grid_rows_flag_best_and_failed_cells() {
        let stats = crate::selection::FitStatistics {
            cpo: vec![0.5],
            cpo_cv: vec![0.01],
            b: -0.69,
            dev_mean: 2.0,
            dev_at_mean: 1.5,
            dic: 2.5,
        };
        let summary = crate::inference::PosteriorSummary { level: 0.95, rows: vec![] };
        let grid = GridResult {
            cells: vec![
                GridCell {
                    gamma: 0.5,
                    intervals: 1,
                    outcome: CellOutcome::Fit { stats, summary },
                },
                GridCell {
                    gamma: 1.0,
                    intervals: 5,
                    outcome: CellOutcome::Failed { message: "too, many intervals".into() },
                },
            ],
            best_by_b: Some(0),
            best_by_dic: Some(0),
        };
        let mut out = Vec::new();
        write_grid_csv(&mut out, &grid).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("best_by_B_and_DIC"));
        assert!(text.contains("failed: too; many intervals"));
    }

    #[test]
    fn summary_json_schema_fields() {
        let (chain, data, part) = small_chain();
        let summary = crate::inference::summarize(&chain, 0.95).unwrap();
        let stats = crate::selection::fit_statistics(&chain, &data, &part).unwrap();
        let doc = SummaryDoc {
            config: summary_config(
                &chain.config,
                &chain.settings,
                part.cuts(),
                data.covariate_names(),
            ),
            summaries: summary.rows,
            fit: SummaryFit {
                b: stats.b,
                dic: stats.dic,
                dev_mean: stats.dev_mean,
                dev_at_mean: stats.dev_at_mean,
            },
            diagnostics: SummaryDiagnostics { geweke_z: vec![Some(0.1), None] },
        };
        let mut out = Vec::new();
        write_summary_json(&mut out, &doc).unwrap();
        let value: serde_json::Value = serde_json::from_slice(&out).unwrap();
        for key in ["config", "summaries", "fit", "diagnostics"] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        assert!(value["summaries"][0]["hpd_low"].is_number());
        assert!(value["fit"]["dev_at_mean"].is_number());
        assert!(value["diagnostics"]["geweke_z"][1].is_null());
        let back: SummaryDoc = serde_json::from_slice(&out).unwrap();
        assert_eq!(back, doc);
    }
}

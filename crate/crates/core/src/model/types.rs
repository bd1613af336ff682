use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-censored survival data: observed times, event indicators, and a
/// dense covariate matrix for `n` subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    events: Vec<bool>,
    covariates: Vec<f64>, // row-major n x p
    covariate_names: Vec<String>,
}

impl SurvivalDataset {
    /// Builds a validated dataset: finite nonnegative times and a dense,
    /// finite covariate matrix. Datasets without events are representable
    /// (their likelihood is well defined) but cannot be partitioned;
    /// ingestion and partition construction reject them.
    pub fn new(
        times: Vec<f64>,
        events: Vec<bool>,
        covariates: Vec<Vec<f64>>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = times.len();
        if events.len() != n || covariates.len() != n {
            return Err(Error::Domain(format!(
                "length mismatch: {} times, {} events, {} covariate rows",
                n,
                events.len(),
                covariates.len()
            )));
        }
        let p = covariate_names.len();
        for (i, t) in times.iter().enumerate() {
            if !t.is_finite() || *t < 0.0 {
                return Err(Error::Domain(format!("time {} for subject {} is invalid", t, i + 1)));
            }
        }
        let mut flat = Vec::with_capacity(n * p);
        for (i, row) in covariates.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Domain(format!(
                    "subject {} has {} covariates, expected {}",
                    i + 1,
                    row.len(),
                    p
                )));
            }
            for v in row {
                if !v.is_finite() {
                    return Err(Error::Domain(format!("non-finite covariate for subject {}", i + 1)));
                }
            }
            flat.extend_from_slice(row);
        }
        Ok(Self { times, events, covariates: flat, covariate_names })
    }

    /// True when the dataset contains at least one observed event.
    pub fn has_events(&self) -> bool {
        self.events.iter().any(|&e| e)
    }

    /// The degenerate zero-subject dataset. Its likelihood is identically
    /// zero on the log scale, so chains run against it sample the prior.
    pub fn empty(covariate_names: Vec<String>) -> Self {
        Self { times: Vec::new(), events: Vec::new(), covariates: Vec::new(), covariate_names }
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn is_event(&self, i: usize) -> bool {
        self.events[i]
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn covariate_row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.covariates[i * p..(i + 1) * p]
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Index of a covariate column by name.
    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    /// Observed event times, unsorted, with multiplicity.
    pub fn event_times(&self) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.events)
            .filter_map(|(&t, &e)| if e { Some(t) } else { None })
            .collect()
    }

    /// Largest observed time (0 for the empty dataset).
    pub fn max_time(&self) -> f64 {
        self.times.iter().cloned().fold(0.0, f64::max)
    }

    /// Linear predictor `beta' Z_i`.
    pub fn linear_predictor(&self, beta: &[f64], i: usize) -> f64 {
        self.covariate_row(i).iter().zip(beta).map(|(z, b)| z * b).sum()
    }
}

/// Cut points `0 = s_0 < s_1 < ... < s_J` defining the piecewise-constant
/// baseline intervals `(s_{j-1}, s_j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimePartition {
    cuts: Vec<f64>,
}

impl TimePartition {
    /// Validates `s_0 = 0` and strict monotonicity. Data-dependent checks
    /// (coverage, events per interval) live in [`TimePartition::validate_for`].
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.len() < 2 {
            return Err(Error::Partition("at least one interval required".into()));
        }
        if cuts[0] != 0.0 {
            return Err(Error::Partition(format!("first cut point must be 0, got {}", cuts[0])));
        }
        for w in cuts.windows(2) {
            if !(w[1].is_finite() && w[1] > w[0]) {
                return Err(Error::Partition(format!(
                    "cut points must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { cuts })
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Number of intervals J.
    pub fn intervals(&self) -> usize {
        self.cuts.len() - 1
    }

    /// Partition end `s_J`.
    pub fn end(&self) -> f64 {
        *self.cuts.last().unwrap()
    }

    /// Zero-based interval index of an observed time under the half-open
    /// convention: `y` in `(s_{j-1}, s_j]` maps to `j-1`; `y = 0` maps to
    /// interval 0 with zero exposure.
    pub fn interval_index(&self, y: f64) -> Result<usize> {
        if !(y >= 0.0) {
            return Err(Error::Domain(format!("time {} is negative", y)));
        }
        if y > self.end() {
            return Err(Error::Domain(format!(
                "time {} exceeds partition end {}",
                y,
                self.end()
            )));
        }
        Ok(self.cuts[1..].partition_point(|&c| c < y))
    }

    /// Time spent in interval `j` by a subject observed until `y`.
    pub fn exposure(&self, y: f64, j: usize) -> f64 {
        (y.min(self.cuts[j + 1]) - self.cuts[j]).max(0.0)
    }

    /// Checks the data-dependent invariants: `s_J` beyond every observed
    /// time and at least one event in every interval.
    pub fn validate_for(&self, data: &SurvivalDataset) -> Result<()> {
        if data.n() > 0 && data.max_time() >= self.end() {
            return Err(Error::Partition(format!(
                "partition end {} does not exceed the largest observed time {}",
                self.end(),
                data.max_time()
            )));
        }
        let mut has_event = vec![false; self.intervals()];
        for i in 0..data.n() {
            if data.is_event(i) {
                has_event[self.interval_index(data.time(i))?] = true;
            }
        }
        if data.n() > 0 {
            if let Some(j) = has_event.iter().position(|&e| !e) {
                return Err(Error::Partition(format!("interval {} contains no event", j + 1)));
            }
        }
        Ok(())
    }
}

/// Model and prior configuration: transformation index, interval count,
/// constrained-coefficient choice, and prior hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Transformation index in [0, 1]; 0 is the multiplicative link, 1 the additive.
    pub gamma: f64,
    /// Number of baseline intervals J.
    pub intervals: usize,
    /// Zero-based index of the coefficient carrying the truncated prior.
    pub constrained: usize,
    /// Prior standard deviation per coefficient.
    pub sigma: Vec<f64>,
    /// Gamma prior shape for each baseline level.
    pub alpha: f64,
    /// Gamma prior rate for each baseline level.
    pub xi: f64,
}

impl ModelConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if self.intervals == 0 {
            return Err(Error::Config("at least one interval required".into()));
        }
        if self.sigma.len() != p {
            return Err(Error::Config(format!(
                "{} prior standard deviations for {} covariates",
                self.sigma.len(),
                p
            )));
        }
        if self.sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("prior standard deviations must be positive".into()));
        }
        if !(self.alpha > 0.0) || !(self.xi > 0.0) {
            return Err(Error::Config("gamma prior parameters must be positive".into()));
        }
        if p > 0 && self.constrained >= p {
            return Err(Error::Config(format!(
                "constrained coefficient index {} out of range for {} covariates",
                self.constrained, p
            )));
        }
        Ok(())
    }

    pub fn sigma_k(&self) -> f64 {
        self.sigma[self.constrained]
    }
}

/// A point `(beta, lambda)` in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterState {
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl ParameterState {
    pub fn new(beta: Vec<f64>, lambda: Vec<f64>) -> Self {
        Self { beta, lambda }
    }
}

//! Convergence z-scores comparing early and late chain segments, with the
//! spectral density at zero estimated by non-overlapping batch means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{mean, sample_variance};
use crate::sampler::ChainOutput;

/// Diagnostic outcome for one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GewekeEntry {
    Z(f64),
    /// The segment variance vanished (constant chain); no z-score applies.
    Constant,
}

impl GewekeEntry {
    pub fn z(&self) -> Option<f64> {
        match self {
            GewekeEntry::Z(z) => Some(*z),
            GewekeEntry::Constant => None,
        }
    }
}

/// Per-parameter z-scores and the window fractions that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GewekeReport {
    pub names: Vec<String>,
    pub entries: Vec<GewekeEntry>,
    pub window_early: f64,
    pub window_late: f64,
}

/// Spectral density at zero via batch means: `batch_size * var(batch means)`
/// over `floor(sqrt(len))` batches. Returns the estimate and the number of
/// points used.
fn spectral_density(segment: &[f64]) -> (f64, usize) {
    let len = segment.len();
    let n_batches = ((len as f64).sqrt().floor() as usize).max(1);
    let batch_size = len / n_batches;
    let used = n_batches * batch_size;
    let batch_means: Vec<f64> = (0..n_batches)
        .map(|b| mean(&segment[b * batch_size..(b + 1) * batch_size]))
        .collect();
    (batch_size as f64 * sample_variance(&batch_means), used)
}

/// z-score for one series: `(mean_early - mean_late) / sqrt(s_e/n_e + s_l/n_l)`.
pub fn geweke_z(series: &[f64], early_fraction: f64, late_fraction: f64) -> Result<GewekeEntry> {
    if series.len() < 100 {
        return Err(Error::Domain(format!(
            "at least 100 retained draws required, got {}",
            series.len()
        )));
    }
    if !(early_fraction > 0.0 && late_fraction > 0.0 && early_fraction + late_fraction <= 1.0) {
        return Err(Error::Domain(format!(
            "window fractions ({early_fraction}, {late_fraction}) must be positive and sum to at most 1"
        )));
    }
    let n = series.len();
    let n_early = ((early_fraction * n as f64).floor() as usize).max(2);
    let n_late = ((late_fraction * n as f64).floor() as usize).max(2);
    let early = &series[..n_early];
    let late = &series[n - n_late..];
    let (s_early, used_early) = spectral_density(early);
    let (s_late, used_late) = spectral_density(late);
    let variance = s_early / used_early as f64 + s_late / used_late as f64;
    if variance <= 0.0 {
        return Ok(GewekeEntry::Constant);
    }
    Ok(GewekeEntry::Z((mean(early) - mean(late)) / variance.sqrt()))
}

/// Applies [`geweke_z`] to every parameter of a chain. Defaults elsewhere
/// use the first 10% against the last 50%.
pub fn geweke_diagnostic(
    chain: &ChainOutput,
    early_fraction: f64,
    late_fraction: f64,
) -> Result<GewekeReport> {
    if chain.len() < 100 {
        return Err(Error::Domain(format!(
            "at least 100 retained draws required, got {}",
            chain.len()
        )));
    }
    let names = chain.parameter_names();
    let mut entries = Vec::with_capacity(chain.dim());
    for idx in 0..chain.dim() {
        entries.push(geweke_z(&chain.parameter_series(idx), early_fraction, late_fraction)?);
    }
    Ok(GewekeReport { names, entries, window_early: early_fraction, window_late: late_fraction })
}

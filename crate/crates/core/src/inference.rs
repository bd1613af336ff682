//! Posterior summaries and predictive quantities.
//!
//! Highest-density intervals use the shortest-window rule on sorted draws:
//! among all contiguous windows of `ceil(level * M)` draws the narrowest
//! wins, ties resolved toward the lowest start index. This is brute-force
//! verifiable and deterministic given the chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{mean, sample_variance};
use crate::model::{hazard, SurvivalDataset, TimePartition};
use crate::sampler::ChainOutput;

/// Location, spread, and highest-density interval for one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub hpd_low: f64,
    pub hpd_high: f64,
}

/// Posterior summary table at a given credible level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub level: f64,
    pub rows: Vec<ParameterSummary>,
}

/// Shortest window containing `ceil(level * M)` sorted draws.
pub fn hpd_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if draws.len() < 2 {
        return Err(Error::Domain("at least two draws required".into()));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::Domain(format!("credible level {} outside (0, 1)", level)));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = sorted.len();
    let window = ((level * m as f64).ceil() as usize).clamp(1, m);
    let mut best = (sorted[0], sorted[window - 1]);
    let mut best_width = best.1 - best.0;
    for start in 1..=(m - window) {
        let width = sorted[start + window - 1] - sorted[start];
        if width < best_width {
            best_width = width;
            best = (sorted[start], sorted[start + window - 1]);
        }
    }
    Ok(best)
}

/// Coordinate-wise means, standard deviations, and HPD intervals.
pub fn summarize(chain: &ChainOutput, level: f64) -> Result<PosteriorSummary> {
    if chain.len() < 2 {
        return Err(Error::Domain("at least two retained draws required".into()));
    }
    let names = chain.parameter_names();
    let mut rows = Vec::with_capacity(chain.dim());
    for (idx, name) in names.into_iter().enumerate() {
        let series = chain.parameter_series(idx);
        let (hpd_low, hpd_high) = hpd_interval(&series, level)?;
        rows.push(ParameterSummary {
            name,
            mean: mean(&series),
            sd: sample_variance(&series).sqrt(),
            hpd_low,
            hpd_high,
        });
    }
    Ok(PosteriorSummary { level, rows })
}

/// Piecewise cumulative hazard `H(t)` for one draw and covariate profile.
fn cumulative_hazard(
    beta: &[f64],
    lambda: &[f64],
    profile: &[f64],
    partition: &TimePartition,
    gamma: f64,
    t: f64,
) -> Result<f64> {
    let eta: f64 = profile.iter().zip(beta).map(|(z, b)| z * b).sum();
    let cuts = partition.cuts();
    let mut total = 0.0;
    for j in 0..partition.intervals() {
        if cuts[j] >= t {
            break;
        }
        let overlap = (t.min(cuts[j + 1]) - cuts[j]).max(0.0);
        total += hazard(lambda[j], eta, gamma)? * overlap;
    }
    Ok(total)
}

/// Posterior predictive survival probability at time `t` for a covariate
/// profile: the average over draws of `exp(-H(t))`.
pub fn predict_survival(
    chain: &ChainOutput,
    profile: &[f64],
    t: f64,
    partition: &TimePartition,
) -> Result<f64> {
    if profile.len() != chain.p() {
        return Err(Error::Domain(format!(
            "profile has {} entries for {} covariates",
            profile.len(),
            chain.p()
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("negative query time {}", t)));
    }
    if t > partition.end() {
        return Err(Error::Extrapolation(format!(
            "time {} beyond the partition end {}; the hazard is undefined there",
            t,
            partition.end()
        )));
    }
    let gamma = chain.config.gamma;
    let mut total = 0.0;
    for draw in &chain.draws {
        total += (-cumulative_hazard(&draw.beta, &draw.lambda, profile, partition, gamma, t)?).exp();
    }
    Ok(total / chain.len() as f64)
}

/// Survival probabilities over a time grid for one covariate profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPrediction {
    pub profile: Vec<f64>,
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
}

/// [`predict_survival`] over a grid of times.
pub fn predict_survival_curve(
    chain: &ChainOutput,
    profile: &[f64],
    times: &[f64],
    partition: &TimePartition,
) -> Result<SurvivalPrediction> {
    let survival = times
        .iter()
        .map(|&t| predict_survival(chain, profile, t, partition))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SurvivalPrediction { profile: profile.to_vec(), times: times.to_vec(), survival })
}

/// Posterior mean hazard at each query time for a covariate profile.
/// Times must lie inside `(0, s_J]`.
pub fn hazard_curve(
    chain: &ChainOutput,
    profile: &[f64],
    times: &[f64],
    partition: &TimePartition,
) -> Result<Vec<f64>> {
    if profile.len() != chain.p() {
        return Err(Error::Domain(format!(
            "profile has {} entries for {} covariates",
            profile.len(),
            chain.p()
        )));
    }
    let gamma = chain.config.gamma;
    let mut curve = Vec::with_capacity(times.len());
    for &t in times {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("hazard query time {} must be positive", t)));
        }
        if t > partition.end() {
            return Err(Error::Extrapolation(format!(
                "time {} beyond the partition end {}",
                t,
                partition.end()
            )));
        }
        let j = partition.interval_index(t)?;
        let mut total = 0.0;
        for draw in &chain.draws {
            let eta: f64 = profile.iter().zip(&draw.beta).map(|(z, b)| z * b).sum();
            total += hazard(draw.lambda[j], eta, gamma)?;
        }
        curve.push(total / chain.len() as f64);
    }
    Ok(curve)
}

/// Cumulative-hazard step function for one subject group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeHazardCurve {
    pub label: String,
    /// Distinct event times, ascending.
    pub times: Vec<f64>,
    /// Cumulative hazard immediately after each event time.
    pub cumulative_hazard: Vec<f64>,
}

/// Nelson–Aalen estimator per group: the running sum of `d(t) / r(t)` over
/// distinct event times, with ties aggregated. `group_of[i]` assigns subject
/// `i` to a label index; every label must own at least one subject.
pub fn nelson_aalen(
    data: &SurvivalDataset,
    group_of: &[usize],
    labels: &[String],
) -> Result<Vec<CumulativeHazardCurve>> {
    if group_of.len() != data.n() {
        return Err(Error::Domain(format!(
            "{} group assignments for {} subjects",
            group_of.len(),
            data.n()
        )));
    }
    if let Some(&bad) = group_of.iter().find(|&&g| g >= labels.len()) {
        return Err(Error::Domain(format!("group index {} out of range", bad)));
    }
    let mut curves = Vec::with_capacity(labels.len());
    for (g, label) in labels.iter().enumerate() {
        let members: Vec<usize> = (0..data.n()).filter(|&i| group_of[i] == g).collect();
        if members.is_empty() {
            return Err(Error::Domain(format!("group '{}' has no subjects", label)));
        }
        let mut event_times: Vec<f64> = members
            .iter()
            .filter(|&&i| data.is_event(i))
            .map(|&i| data.time(i))
            .collect();
        event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        event_times.dedup();
        let mut times = Vec::with_capacity(event_times.len());
        let mut cumulative = Vec::with_capacity(event_times.len());
        let mut running = 0.0;
        for &t in &event_times {
            let deaths = members
                .iter()
                .filter(|&&i| data.is_event(i) && data.time(i) == t)
                .count() as f64;
            let at_risk = members.iter().filter(|&&i| data.time(i) >= t).count() as f64;
            running += deaths / at_risk;
            times.push(t);
            cumulative.push(running);
        }
        curves.push(CumulativeHazardCurve { label: label.clone(), times, cumulative_hazard: cumulative });
    }
    Ok(curves)
}

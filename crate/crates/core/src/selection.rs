//! Model-fit statistics and the `(gamma, J)` grid search.
//!
//! Conditional predictive ordinates are harmonic means of per-draw subject
//! likelihoods, computed through log-sum-exp of the negated log factors so
//! reciprocals never overflow. The deviance information criterion pairs the
//! posterior mean deviance (from the stored per-draw log-likelihoods) with
//! the deviance at the coordinate-wise posterior mean.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::build_partition;
use crate::error::{Error, Result};
use crate::inference::{summarize, PosteriorSummary};
use crate::math::log_sum_exp;
use crate::model::{
    constraint_satisfied, log_likelihood, ModelConfig, ParameterState, SurvivalDataset,
    TimePartition,
};
use crate::sampler::{run_chain, ChainOutput, SamplerSettings};

/// Per-subject predictive scores and deviance summaries for one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStatistics {
    /// Conditional predictive ordinate per subject.
    pub cpo: Vec<f64>,
    /// Monte Carlo coefficient of variation of each reciprocal-likelihood
    /// average, a stability gauge for the harmonic-mean estimate.
    pub cpo_cv: Vec<f64>,
    /// Sum of log CPO (the pseudo marginal-likelihood score; larger fits better).
    pub b: f64,
    /// Posterior mean deviance `-2/M sum_m log L_m`.
    pub dev_mean: f64,
    /// Deviance at the posterior mean state.
    pub dev_at_mean: f64,
    /// `2 * dev_mean - dev_at_mean`; smaller fits better.
    pub dic: f64,
}

/// Log of the single-subject likelihood factor at one draw.
pub fn log_subject_likelihood(
    state: &ParameterState,
    subject: usize,
    data: &SurvivalDataset,
    partition: &TimePartition,
    gamma: f64,
) -> Result<f64> {
    if subject >= data.n() {
        return Err(Error::Domain(format!("subject {} out of range", subject + 1)));
    }
    if state.beta.len() != data.p() || state.lambda.len() != partition.intervals() {
        return Err(Error::Domain("state dimensions do not match".into()));
    }
    let y = data.time(subject);
    let ji = partition.interval_index(y)?;
    let eta = data.linear_predictor(&state.beta, subject);
    let mut log_f = 0.0;
    if gamma == 0.0 {
        let scale = eta.exp();
        for j in 0..=ji {
            log_f -= state.lambda[j] * scale * partition.exposure(y, j);
        }
        if data.is_event(subject) {
            log_f += state.lambda[ji].ln() + eta;
        }
    } else {
        for j in 0..=ji {
            let u = state.lambda[j].powf(gamma) + gamma * eta;
            if u < 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            log_f -= u.powf(1.0 / gamma) * partition.exposure(y, j);
        }
        if data.is_event(subject) {
            let u = state.lambda[ji].powf(gamma) + gamma * eta;
            log_f += u.ln() / gamma;
        }
    }
    Ok(log_f)
}

/// The single-subject likelihood factor; the product over subjects equals
/// the full likelihood.
pub fn subject_likelihood(
    state: &ParameterState,
    subject: usize,
    data: &SurvivalDataset,
    partition: &TimePartition,
    gamma: f64,
) -> Result<f64> {
    Ok(log_subject_likelihood(state, subject, data, partition, gamma)?.exp())
}

/// Harmonic-mean conditional predictive ordinates, one per subject.
///
/// A subject whose likelihood vanishes at any draw collapses the harmonic
/// mean; its CPO is reported as 0 with a warning.
pub fn compute_cpo(
    chain: &ChainOutput,
    data: &SurvivalDataset,
    partition: &TimePartition,
) -> Result<Vec<f64>> {
    Ok(compute_cpo_with_cv(chain, data, partition)?.0)
}

/// [`compute_cpo`] plus the Monte Carlo coefficient of variation of each
/// reciprocal-likelihood average.
pub fn compute_cpo_with_cv(
    chain: &ChainOutput,
    data: &SurvivalDataset,
    partition: &TimePartition,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if chain.is_empty() {
        return Err(Error::Domain("empty chain".into()));
    }
    let gamma = chain.config.gamma;
    let m = chain.len() as f64;
    let per_subject: Result<Vec<(f64, f64)>> = (0..data.n())
        .into_par_iter()
        .map(|i| {
            let neg_log: Result<Vec<f64>> = chain
                .draws
                .iter()
                .map(|draw| Ok(-log_subject_likelihood(draw, i, data, partition, gamma)?))
                .collect();
            let neg_log = neg_log?;
            let lse = log_sum_exp(&neg_log);
            if lse.is_infinite() && lse > 0.0 {
                warn!("subject {} has a zero-likelihood draw; CPO collapses to 0", i + 1);
                return Ok((0.0, f64::INFINITY));
            }
            // cpo_i = M / sum_m exp(neg_log_m)
            let cpo = (m.ln() - lse).exp();
            // coefficient of variation of the mean of exp(neg_log)
            let max = neg_log.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s1: f64 = neg_log.iter().map(|a| (a - max).exp()).sum();
            let s2: f64 = neg_log.iter().map(|a| (2.0 * (a - max)).exp()).sum();
            let cv = if chain.len() < 2 {
                0.0
            } else {
                let ratio = (m * s2 / (s1 * s1) - 1.0).max(0.0);
                (ratio / (m - 1.0)).sqrt()
            };
            Ok((cpo, cv))
        })
        .collect();
    let per_subject = per_subject?;
    Ok(per_subject.into_iter().unzip())
}

/// `DIC = 2 * dev_mean - dev_at_mean`.
pub fn dic_from_deviances(dev_mean: f64, dev_at_mean: f64) -> f64 {
    2.0 * dev_mean - dev_at_mean
}

/// Deviance components of the information criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DevianceSummary {
    pub dev_mean: f64,
    pub dev_at_mean: f64,
    pub dic: f64,
}

/// Posterior mean deviance, deviance at the posterior mean, and their DIC
/// combination. Errors if the coordinate-wise mean state is inadmissible
/// (use the score `B` instead in that case).
pub fn compute_dic(
    chain: &ChainOutput,
    data: &SurvivalDataset,
    partition: &TimePartition,
) -> Result<DevianceSummary> {
    if chain.is_empty() {
        return Err(Error::Domain("empty chain".into()));
    }
    let m = chain.len() as f64;
    let dev_mean = -2.0 * chain.loglik.iter().sum::<f64>() / m;
    let mean_state = chain.mean_state();
    if !constraint_satisfied(&mean_state, data, chain.config.gamma) {
        return Err(Error::Constraint(
            "posterior mean state violates the hazard constraint; DIC is undefined here, compare models with B instead".into(),
        ));
    }
    let ll_at_mean = log_likelihood(&mean_state, data, partition, chain.config.gamma)?;
    if ll_at_mean == f64::NEG_INFINITY {
        return Err(Error::Constraint(
            "posterior mean state has zero likelihood; DIC is undefined here, compare models with B instead".into(),
        ));
    }
    let dev_at_mean = -2.0 * ll_at_mean;
    Ok(DevianceSummary { dev_mean, dev_at_mean, dic: dic_from_deviances(dev_mean, dev_at_mean) })
}

/// Assembles CPO, `B`, and DIC for one fitted chain.
pub fn fit_statistics(
    chain: &ChainOutput,
    data: &SurvivalDataset,
    partition: &TimePartition,
) -> Result<FitStatistics> {
    let (cpo, cpo_cv) = compute_cpo_with_cv(chain, data, partition)?;
    let b = cpo.iter().map(|c| c.ln()).sum();
    let deviance = compute_dic(chain, data, partition)?;
    Ok(FitStatistics {
        cpo,
        cpo_cv,
        b,
        dev_mean: deviance.dev_mean,
        dev_at_mean: deviance.dev_at_mean,
        dic: deviance.dic,
    })
}

/// Outcome of one grid cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum CellOutcome {
    Fit { stats: FitStatistics, summary: PosteriorSummary },
    Failed { message: String },
}

/// One `(gamma, J)` cell of the selection grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCell {
    pub gamma: f64,
    pub intervals: usize,
    pub outcome: CellOutcome,
}

impl GridCell {
    pub fn stats(&self) -> Option<&FitStatistics> {
        match &self.outcome {
            CellOutcome::Fit { stats, .. } => Some(stats),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// All grid cells in row-major `(gamma, J)` order plus the winning indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridResult {
    pub cells: Vec<GridCell>,
    /// Index of the cell with the largest `B`, if any cell succeeded.
    pub best_by_b: Option<usize>,
    /// Index of the cell with the smallest DIC.
    pub best_by_dic: Option<usize>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Fits every `(gamma, J)` combination with shared priors, collecting fit
/// statistics and posterior summaries. Failed cells are recorded and the
/// grid continues. Cells run in parallel; per-cell seeds derive
/// deterministically from the base seed and the cell index, so the result
/// does not depend on scheduling.
pub fn run_grid(
    data: &SurvivalDataset,
    gammas: &[f64],
    interval_counts: &[usize],
    base_config: &ModelConfig,
    settings: &SamplerSettings,
) -> Result<GridResult> {
    if gammas.is_empty() || interval_counts.is_empty() {
        return Err(Error::Config("grid axes must be non-empty".into()));
    }
    let specs: Vec<(usize, f64, usize)> = gammas
        .iter()
        .flat_map(|&g| interval_counts.iter().map(move |&j| (g, j)))
        .enumerate()
        .map(|(idx, (g, j))| (idx, g, j))
        .collect();

    let cells: Vec<GridCell> = specs
        .par_iter()
        .map(|&(idx, gamma, intervals)| {
            let config = ModelConfig { gamma, intervals, ..base_config.clone() };
            let cell_settings = SamplerSettings {
                seed: settings.seed ^ splitmix64(idx as u64 + 1),
                ..settings.clone()
            };
            let outcome = fit_cell(data, &config, &cell_settings);
            GridCell {
                gamma,
                intervals,
                outcome: match outcome {
                    Ok((stats, summary)) => CellOutcome::Fit { stats, summary },
                    Err(e) => CellOutcome::Failed { message: e.to_string() },
                },
            }
        })
        .collect();

    let mut best_by_b: Option<usize> = None;
    let mut best_by_dic: Option<usize> = None;
    for (idx, cell) in cells.iter().enumerate() {
        if let Some(stats) = cell.stats() {
            if best_by_b.is_none_or(|b| stats.b > cells[b].stats().unwrap().b) {
                best_by_b = Some(idx);
            }
            if best_by_dic.is_none_or(|d| stats.dic < cells[d].stats().unwrap().dic) {
                best_by_dic = Some(idx);
            }
        }
    }
    Ok(GridResult { cells, best_by_b, best_by_dic })
}

fn fit_cell(
    data: &SurvivalDataset,
    config: &ModelConfig,
    settings: &SamplerSettings,
) -> Result<(FitStatistics, PosteriorSummary)> {
    let partition = build_partition(data, config.intervals)?;
    let chain = run_chain(data, &partition, config, settings)?;
    let stats = fit_statistics(&chain, data, &partition)?;
    let summary = summarize(&chain, 0.95)?;
    Ok((stats, summary))
}

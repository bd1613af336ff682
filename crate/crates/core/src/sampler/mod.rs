//! Constrained Metropolis-within-Gibbs sampling.
//!
//! Coefficients are updated by derivative-free adaptive rejection sampling
//! from their log-concave full conditionals, restricted to the admissible
//! range implied by the hazard constraint. Baseline levels are updated by a
//! log-scale Gaussian random-walk Metropolis step whose scale adapts toward
//! 0.44 acceptance during burn-in and is frozen afterwards. A single chain is
//! strictly sequential; concurrency happens across chains.

mod ars;
mod geweke;

pub use geweke::{geweke_diagnostic, geweke_z, GewekeEntry, GewekeReport};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::log_normal_cdf;
use crate::model::likelihood_internals::pow_gamma;
use crate::model::{
    constraint_satisfied, h_gamma, log_prior_lambda_j, LikelihoodContext, ModelConfig,
    ParameterState, SurvivalDataset, TimePartition,
};
use ars::{sample_log_concave, ArsFailure, ArsOptions};

/// Chain-length and proposal settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSettings {
    /// Iterations discarded before retention begins.
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in sweep.
    pub thin: usize,
    /// Number of retained draws.
    pub samples: usize,
    /// RNG seed; identical inputs and seed reproduce the chain bit-exactly.
    pub seed: u64,
    /// Initial log-scale proposal standard deviation for the baseline levels.
    pub metropolis_step: f64,
    /// Sweeps between proposal-scale adaptations during burn-in.
    pub adapt_window: usize,
    /// Number of starting envelope abscissae for the coefficient updates.
    pub ars_init_points: usize,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            burn_in: 2000,
            thin: 5,
            samples: 10_000,
            seed: 42,
            metropolis_step: 0.5,
            adapt_window: 50,
            ars_init_points: 5,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Config("thinning stride must be at least 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("at least one retained draw required".into()));
        }
        if !(self.metropolis_step > 0.0) {
            return Err(Error::Config("metropolis step must be positive".into()));
        }
        if self.adapt_window == 0 {
            return Err(Error::Config("adaptation window must be at least 1".into()));
        }
        if self.ars_init_points < 3 {
            return Err(Error::Config("at least 3 envelope points required".into()));
        }
        Ok(())
    }
}

/// Bookkeeping accumulated while the chain runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    /// Post-burn-in acceptance rate of the baseline-level Metropolis step,
    /// one entry per interval.
    pub lambda_acceptance: Vec<f64>,
    /// Frozen proposal scales after burn-in adaptation.
    pub lambda_step: Vec<f64>,
    /// Coefficient updates that fell back to a Metropolis step after an
    /// envelope failure.
    pub ars_fallbacks: u64,
    /// Total target-density evaluations.
    pub target_evaluations: u64,
}

/// Retained draws with per-draw log-likelihood and the generating
/// configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub draws: Vec<ParameterState>,
    pub loglik: Vec<f64>,
    pub config: ModelConfig,
    pub settings: SamplerSettings,
    pub stats: RunStats,
}

impl ChainOutput {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn p(&self) -> usize {
        self.draws.first().map_or(0, |d| d.beta.len())
    }

    pub fn intervals(&self) -> usize {
        self.draws.first().map_or(0, |d| d.lambda.len())
    }

    /// Flattened parameter count `p + J`.
    pub fn dim(&self) -> usize {
        self.p() + self.intervals()
    }

    /// `beta_1..beta_p, lambda_1..lambda_J`.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.p()).map(|i| format!("beta_{i}")).collect();
        names.extend((1..=self.intervals()).map(|j| format!("lambda_{j}")));
        names
    }

    /// The series of one flattened parameter across draws.
    pub fn parameter_series(&self, idx: usize) -> Vec<f64> {
        let p = self.p();
        self.draws
            .iter()
            .map(|d| if idx < p { d.beta[idx] } else { d.lambda[idx - p] })
            .collect()
    }

    /// Coordinate-wise mean state.
    pub fn mean_state(&self) -> ParameterState {
        let m = self.len() as f64;
        let p = self.p();
        let j = self.intervals();
        let mut beta = vec![0.0; p];
        let mut lambda = vec![0.0; j];
        for d in &self.draws {
            for (acc, v) in beta.iter_mut().zip(&d.beta) {
                *acc += v;
            }
            for (acc, v) in lambda.iter_mut().zip(&d.lambda) {
                *acc += v;
            }
        }
        beta.iter_mut().for_each(|v| *v /= m);
        lambda.iter_mut().for_each(|v| *v /= m);
        ParameterState::new(beta, lambda)
    }
}

/// One per-sweep trace record.
#[derive(Debug, Serialize)]
pub struct TraceRecord<'a> {
    pub iteration: usize,
    pub burn_in: bool,
    pub beta: &'a [f64],
    pub lambda: &'a [f64],
    pub log_likelihood: f64,
    pub lambda_accepted: &'a [bool],
    pub ars_fallback: &'a [bool],
}

/// Receives newline-delimited per-sweep records.
pub trait TraceSink {
    fn record(&mut self, record: &TraceRecord<'_>) -> std::io::Result<()>;
}

/// Writes trace records as JSON lines.
pub struct JsonTraceSink<W: std::io::Write> {
    writer: W,
}

impl<W: std::io::Write> JsonTraceSink<W> {
    pub fn new(writer: W) -> Self {
        Self { writer }
    }

    pub fn into_inner(self) -> W {
        self.writer
    }
}

impl<W: std::io::Write> TraceSink for JsonTraceSink<W> {
    fn record(&mut self, record: &TraceRecord<'_>) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.writer, record)?;
        self.writer.write_all(b"\n")
    }
}

/// Admissible starting state: each baseline level is the crude event rate of
/// its interval (events over exposure, floored), coefficients start at zero.
/// For the empty dataset the prior mean `alpha/xi` is used.
pub fn initialize_state(
    data: &SurvivalDataset,
    partition: &TimePartition,
    config: &ModelConfig,
) -> Result<ParameterState> {
    let j_count = partition.intervals();
    let beta = vec![0.0; data.p()];
    if data.n() == 0 {
        return Ok(ParameterState::new(beta, vec![config.alpha / config.xi; j_count]));
    }
    let mut events = vec![0.0_f64; j_count];
    let mut exposure = vec![0.0_f64; j_count];
    for i in 0..data.n() {
        let y = data.time(i);
        if data.is_event(i) {
            events[partition.interval_index(y)?] += 1.0;
        }
        for (j, e) in exposure.iter_mut().enumerate() {
            *e += partition.exposure(y, j);
        }
    }
    let mut lambda = Vec::with_capacity(j_count);
    for j in 0..j_count {
        if exposure[j] <= 0.0 {
            return Err(Error::Init(format!("interval {} has zero exposure", j + 1)));
        }
        lambda.push((events[j] / exposure[j]).max(1e-6));
    }
    Ok(ParameterState::new(beta, lambda))
}

/// Systematic-scan Gibbs sampler over `beta_1..beta_p, lambda_1..lambda_J`.
pub struct GibbsSampler<'a> {
    ctx: LikelihoodContext<'a>,
    data: &'a SurvivalDataset,
    config: &'a ModelConfig,
    beta: Vec<f64>,
    lambda: Vec<f64>,
    rng: ChaCha8Rng,
    ars_init_points: usize,
    beta_spread: Vec<f64>,
    lambda_scale: Vec<f64>,
    adapting: bool,
    adapt_window: usize,
    window_sweeps: usize,
    window_accepts: Vec<u32>,
    adapt_round: f64,
    post_accepts: Vec<u64>,
    post_proposals: Vec<u64>,
    ars_fallbacks: u64,
    target_evaluations: u64,
    lambda_accepted: Vec<bool>,
    ars_fallback_flags: Vec<bool>,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(
        data: &'a SurvivalDataset,
        partition: &'a TimePartition,
        config: &'a ModelConfig,
        settings: &SamplerSettings,
        initial: ParameterState,
    ) -> Result<Self> {
        let ctx = LikelihoodContext::new(data, partition, config.gamma)?;
        let p = data.p();
        let j_count = partition.intervals();
        if initial.beta.len() != p || initial.lambda.len() != j_count {
            return Err(Error::Domain("initial state dimensions do not match".into()));
        }
        // fail fast when the constrained column is not strictly positive
        if config.gamma > 0.0 && p > 0 {
            h_gamma(&initial.lambda, &initial.beta, data, config.constrained, config.gamma)?;
        }
        if !constraint_satisfied(&initial, data, config.gamma) {
            return Err(Error::Init("initial state violates the hazard constraint".into()));
        }
        Ok(Self {
            ctx,
            data,
            config,
            beta: initial.beta,
            lambda: initial.lambda,
            rng: ChaCha8Rng::seed_from_u64(settings.seed),
            ars_init_points: settings.ars_init_points,
            beta_spread: vec![1.0; p],
            lambda_scale: vec![settings.metropolis_step; j_count],
            adapting: true,
            adapt_window: settings.adapt_window,
            window_sweeps: 0,
            window_accepts: vec![0; j_count],
            adapt_round: 0.0,
            post_accepts: vec![0; j_count],
            post_proposals: vec![0; j_count],
            ars_fallbacks: 0,
            target_evaluations: 0,
            lambda_accepted: vec![false; j_count],
            ars_fallback_flags: vec![false; p],
        })
    }

    pub fn state(&self) -> ParameterState {
        ParameterState::new(self.beta.clone(), self.lambda.clone())
    }

    pub fn log_likelihood(&self) -> f64 {
        self.ctx.log_likelihood(&self.beta, &self.lambda)
    }

    /// Admissible interval for coordinate `m` given the rest of the state.
    fn coordinate_support(&self, m: usize) -> (f64, f64) {
        let gamma = self.config.gamma;
        if gamma == 0.0 {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        let min_lambda = self.lambda.iter().cloned().fold(f64::INFINITY, f64::min);
        let min_pow = pow_gamma(min_lambda, gamma);
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..self.data.n() {
            let row = self.data.covariate_row(i);
            let z_m = row[m];
            if z_m == 0.0 {
                continue;
            }
            let mut rest = 0.0;
            for (c, (z, b)) in row.iter().zip(&self.beta).enumerate() {
                if c != m {
                    rest += z * b;
                }
            }
            let bound = -(min_pow + gamma * rest) / (gamma * z_m);
            if z_m > 0.0 {
                lo = lo.max(bound);
            } else {
                hi = hi.min(bound);
            }
        }
        (lo, hi)
    }

    /// Draws coordinate `m` from its full conditional; falls back to one
    /// Metropolis step when the envelope cannot be built. Returns the new
    /// value.
    pub fn sample_beta_component(&mut self, m: usize) -> f64 {
        let (lo, hi) = self.coordinate_support(m);
        if !(lo < hi) {
            return self.beta[m]; // degenerate support; keep the current point
        }
        let gamma = self.config.gamma;
        let k = self.config.constrained;
        let sigma_m = self.config.sigma[m];
        let sigma_k = self.config.sigma_k();
        let current = self.beta[m];

        let mut scratch = self.beta.clone();
        let ctx = &self.ctx;
        let data = self.data;
        let lambda = &self.lambda;
        let mut evals = 0u64;
        let mut target = |x: f64| {
            evals += 1;
            scratch[m] = x;
            let ll = ctx.log_likelihood(&scratch, lambda);
            if ll == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            let mut t = ll - x * x / (2.0 * sigma_m * sigma_m);
            if gamma > 0.0 && m != k {
                // the truncated-prior normalizer depends on the free coefficients
                match h_gamma(lambda, &scratch, data, k, gamma) {
                    Ok(h) if h.is_finite() => t -= log_normal_cdf(h / sigma_k),
                    Ok(_) => {}
                    Err(_) => return f64::NEG_INFINITY,
                }
            }
            t
        };

        let opts = ArsOptions {
            init_points: self.ars_init_points,
            max_evals: 120,
            spread: self.beta_spread[m].max(1e-8),
        };
        let drawn = sample_log_concave(&mut target, (lo, hi), current, &opts, &mut self.rng)
            .map(|x| {
                // keep a hair inside the support so summation-order rounding
                // cannot flip the constraint recheck at the boundary
                let mut x = x;
                if lo.is_finite() {
                    x = x.max(lo + 1e-12 * (1.0 + lo.abs()));
                }
                if hi.is_finite() {
                    x = x.min(hi - 1e-12 * (1.0 + hi.abs()));
                }
                x
            });
        let new_value = match drawn {
            Ok(x) => x,
            Err(failure) => {
                debug_assert!(
                    failure != ArsFailure::NotLogConcave || gamma > 0.0,
                    "conditional reported non-log-concave at gamma = {gamma}"
                );
                self.ars_fallbacks += 1;
                self.ars_fallback_flags[m] = true;
                // symmetric normal step, scale sigma_m / 10
                let z: f64 = StandardNormal.sample(&mut self.rng);
                let proposal = current + z * sigma_m / 10.0;
                if proposal < lo || proposal > hi {
                    current
                } else {
                    let t_cur = target(current);
                    let t_prop = target(proposal);
                    let u: f64 = self.rng.random();
                    if u.max(f64::MIN_POSITIVE).ln() < t_prop - t_cur {
                        proposal
                    } else {
                        current
                    }
                }
            }
        };
        self.target_evaluations += evals;
        self.beta[m] = new_value;
        let moved = (new_value - current).abs();
        self.beta_spread[m] = (0.9 * self.beta_spread[m] + 0.1 * (2.0 * moved))
            .clamp(1e-6, 1e6);
        new_value
    }

    fn lambda_target(&self, j: usize, value: f64, scratch: &mut Vec<f64>) -> f64 {
        scratch.clone_from(&self.lambda);
        scratch[j] = value;
        // the prior support covers every (subject, interval) pair, including
        // intervals past a subject's own, which the likelihood never touches
        if self.config.gamma > 0.0 && self.data.n() > 0 {
            let min_lambda = scratch.iter().cloned().fold(f64::INFINITY, f64::min);
            let min_pow = pow_gamma(min_lambda, self.config.gamma);
            let gamma = self.config.gamma;
            let violated = (0..self.data.n()).any(|i| {
                min_pow + gamma * self.data.linear_predictor(&self.beta, i) < 0.0
            });
            if violated {
                return f64::NEG_INFINITY;
            }
        }
        let ll = self.ctx.log_likelihood(&self.beta, scratch);
        if ll == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let mut t = ll + log_prior_lambda_j(value, self.config.alpha, self.config.xi);
        if self.config.gamma > 0.0 && self.data.p() > 0 {
            match h_gamma(scratch, &self.beta, self.data, self.config.constrained, self.config.gamma) {
                Ok(h) if h.is_finite() => t -= log_normal_cdf(h / self.config.sigma_k()),
                Ok(_) => {}
                Err(_) => return f64::NEG_INFINITY,
            }
        }
        t
    }

    /// One log-scale random-walk Metropolis update of baseline level `j`.
    /// Returns whether the proposal was accepted.
    pub fn sample_lambda_component(&mut self, j: usize) -> bool {
        let current = self.lambda[j];
        let z: f64 = StandardNormal.sample(&mut self.rng);
        let proposal = current * (self.lambda_scale[j] * z).exp();
        let mut scratch = Vec::new();
        let accepted = if proposal > 0.0 && proposal.is_finite() {
            let t_cur = self.lambda_target(j, current, &mut scratch);
            let t_prop = self.lambda_target(j, proposal, &mut scratch);
            self.target_evaluations += 2;
            // log-scale random walk: Jacobian contributes proposal/current
            let log_accept = (t_prop + proposal.ln()) - (t_cur + current.ln());
            let u: f64 = self.rng.random();
            t_prop > f64::NEG_INFINITY && u.max(f64::MIN_POSITIVE).ln() < log_accept
        } else {
            false
        };
        if accepted {
            self.lambda[j] = proposal;
        }
        if self.adapting {
            if accepted {
                self.window_accepts[j] += 1;
            }
        } else {
            self.post_proposals[j] += 1;
            if accepted {
                self.post_accepts[j] += 1;
            }
        }
        self.lambda_accepted[j] = accepted;
        accepted
    }

    /// One systematic scan over all coordinates.
    pub fn sweep(&mut self) {
        for m in 0..self.beta.len() {
            self.ars_fallback_flags[m] = false;
            self.sample_beta_component(m);
        }
        for j in 0..self.lambda.len() {
            self.sample_lambda_component(j);
        }
        if self.adapting {
            self.window_sweeps += 1;
            if self.window_sweeps >= self.adapt_window {
                self.adapt_round += 1.0;
                let step = 1.0 / self.adapt_round.sqrt();
                for j in 0..self.lambda.len() {
                    let rate = f64::from(self.window_accepts[j]) / self.window_sweeps as f64;
                    let factor = ((rate - 0.44) * step).exp();
                    self.lambda_scale[j] = (self.lambda_scale[j] * factor).clamp(1e-4, 20.0);
                    self.window_accepts[j] = 0;
                }
                self.window_sweeps = 0;
            }
        }
        #[cfg(debug_assertions)]
        {
            let state = ParameterState::new(self.beta.clone(), self.lambda.clone());
            debug_assert!(
                constraint_satisfied(&state, self.data, self.config.gamma),
                "state left the admissible region"
            );
        }
    }

    /// Freezes proposal scales; called at the end of burn-in.
    pub fn end_burn_in(&mut self) {
        self.adapting = false;
        self.window_sweeps = 0;
    }

    fn stats(&self) -> RunStats {
        let acceptance = self
            .post_accepts
            .iter()
            .zip(&self.post_proposals)
            .map(|(&a, &p)| if p == 0 { f64::NAN } else { a as f64 / p as f64 })
            .collect();
        RunStats {
            lambda_acceptance: acceptance,
            lambda_step: self.lambda_scale.clone(),
            ars_fallbacks: self.ars_fallbacks,
            target_evaluations: self.target_evaluations,
        }
    }
}

/// Runs the chain: burn-in with proposal adaptation, then `samples` retained
/// draws at stride `thin`. Deterministic given the seed.
pub fn run_chain(
    data: &SurvivalDataset,
    partition: &TimePartition,
    config: &ModelConfig,
    settings: &SamplerSettings,
) -> Result<ChainOutput> {
    run_chain_traced(data, partition, config, settings, None)
}

/// [`run_chain`] with an optional per-sweep trace sink.
pub fn run_chain_traced(
    data: &SurvivalDataset,
    partition: &TimePartition,
    config: &ModelConfig,
    settings: &SamplerSettings,
    mut sink: Option<&mut dyn TraceSink>,
) -> Result<ChainOutput> {
    config.validate(data.p())?;
    settings.validate()?;
    if partition.intervals() != config.intervals {
        return Err(Error::Domain(format!(
            "partition has {} intervals but the configuration expects {}",
            partition.intervals(),
            config.intervals
        )));
    }
    partition.validate_for(data)?;
    let initial = initialize_state(data, partition, config)?;
    let mut sampler = GibbsSampler::new(data, partition, config, settings, initial)?;

    let total = settings.burn_in + settings.samples * settings.thin;
    let mut draws = Vec::with_capacity(settings.samples);
    let mut loglik = Vec::with_capacity(settings.samples);
    for it in 0..total {
        if it == settings.burn_in {
            sampler.end_burn_in();
        }
        sampler.sweep();
        let in_burn_in = it < settings.burn_in;
        if let Some(sink) = sink.as_deref_mut() {
            let record = TraceRecord {
                iteration: it + 1,
                burn_in: in_burn_in,
                beta: &sampler.beta,
                lambda: &sampler.lambda,
                log_likelihood: sampler.log_likelihood(),
                lambda_accepted: &sampler.lambda_accepted,
                ars_fallback: &sampler.ars_fallback_flags,
            };
            sink.record(&record)?;
        }
        if !in_burn_in && (it - settings.burn_in + 1).is_multiple_of(settings.thin) {
            draws.push(sampler.state());
            loglik.push(sampler.log_likelihood());
        }
    }
    debug_assert_eq!(draws.len(), settings.samples);
    Ok(ChainOutput {
        draws,
        loglik,
        config: config.clone(),
        settings: settings.clone(),
        stats: sampler.stats(),
    })
}

//! Closed-form model mathematics: the power-transform link, hazard
//! evaluation, the nonnegativity constraint, the piecewise-exponential
//! log-likelihood, and the prior densities.
//!
//! Everything here is a pure function. Likelihood and prior evaluations
//! return `-inf` sentinels for inadmissible states instead of erroring, so
//! the sampler hot path never unwinds.

use crate::error::{Error, Result};
use crate::math::{log_normal_cdf, LN_SQRT_2PI};
use crate::model::types::{ModelConfig, ParameterState, SurvivalDataset, TimePartition};

/// Hazards below this value clamp the event log-hazard to `-inf`.
const LOG_HAZARD_FLOOR: f64 = -690.775_527_898_213_7; // ln(1e-300)

#[inline]
pub(crate) fn pow_gamma(x: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        x
    } else if gamma == 0.5 {
        x.sqrt()
    } else if gamma == 0.25 {
        x.sqrt().sqrt()
    } else {
        x.powf(gamma)
    }
}

#[inline]
fn pow_inv_gamma(u: f64, gamma: f64, inv_gamma: f64) -> f64 {
    if gamma == 1.0 {
        u
    } else if gamma == 0.5 {
        u * u
    } else if gamma == 0.25 {
        let s = u * u;
        s * s
    } else {
        u.powf(inv_gamma)
    }
}

/// Power transform `(y^gamma - 1) / gamma`, with the log limit at `gamma = 0`.
pub fn box_cox(y: f64, gamma: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("box_cox requires y > 0, got {}", y)));
    }
    if gamma == 0.0 {
        Ok(y.ln())
    } else if gamma.abs() < 1e-4 {
        // (y^g - 1)/g = expm1(g ln y)/g; the direct form loses ~1/g ulps
        Ok((gamma * y.ln()).exp_m1() / gamma)
    } else {
        Ok((pow_gamma(y, gamma) - 1.0) / gamma)
    }
}

/// Subject hazard for baseline level `lambda_j` and linear predictor `eta`:
/// `lambda_j * exp(eta)` at `gamma = 0`, `(lambda_j^gamma + gamma*eta)^(1/gamma)`
/// for `gamma > 0`.
///
/// A violated nonnegativity constraint is reported as
/// [`Error::Constraint`], distinct from the [`Error::Domain`] raised for a
/// nonpositive baseline level.
pub fn hazard(lambda_j: f64, eta: f64, gamma: f64) -> Result<f64> {
    if !(lambda_j > 0.0) {
        return Err(Error::Domain(format!("baseline level must be positive, got {}", lambda_j)));
    }
    if gamma == 0.0 {
        return Ok(lambda_j * eta.exp());
    }
    let u = pow_gamma(lambda_j, gamma) + gamma * eta;
    if u < 0.0 {
        return Err(Error::Constraint(format!(
            "lambda^gamma + gamma*eta = {} < 0 at gamma = {}",
            u, gamma
        )));
    }
    Ok(pow_inv_gamma(u, gamma, 1.0 / gamma))
}

/// True iff `lambda_j^gamma + gamma * beta'Z_i >= 0` for every subject and
/// interval (vacuous at `gamma = 0` given positive baseline levels).
pub fn constraint_satisfied(state: &ParameterState, data: &SurvivalDataset, gamma: f64) -> bool {
    if state.lambda.iter().any(|l| !(*l > 0.0)) {
        return false;
    }
    if gamma == 0.0 {
        return true;
    }
    let min_lambda = state.lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_pow = pow_gamma(min_lambda, gamma);
    (0..data.n()).all(|i| min_pow + gamma * data.linear_predictor(&state.beta, i) >= 0.0)
}

/// The constraint margin for the constrained coefficient:
/// `min over (i, j) of (lambda_j^gamma + gamma * beta_(-k)'Z_(i,-k)) / (gamma * Z_ik)`.
///
/// The admissible region for `beta_k` is exactly `beta_k >= -h_gamma`. The
/// component `k` of `beta` is ignored. Returns `+inf` for an empty dataset
/// (no constraint).
pub fn h_gamma(
    lambda: &[f64],
    beta: &[f64],
    data: &SurvivalDataset,
    k: usize,
    gamma: f64,
) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("h_gamma requires gamma > 0, got {}", gamma)));
    }
    if data.p() > 0 && k >= data.p() {
        return Err(Error::Config(format!("constrained index {} out of range", k)));
    }
    let min_lambda = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_lambda > 0.0) {
        return Err(Error::Domain("baseline levels must be positive".into()));
    }
    let min_pow = pow_gamma(min_lambda, gamma);
    let mut h = f64::INFINITY;
    for i in 0..data.n() {
        let row = data.covariate_row(i);
        let z_ik = row[k];
        if !(z_ik > 0.0) {
            return Err(Error::Config(format!(
                "covariate {} must be strictly positive for the constrained coefficient; subject {} has value {}",
                k + 1,
                i + 1,
                z_ik
            )));
        }
        let eta_rest: f64 = row
            .iter()
            .zip(beta)
            .enumerate()
            .filter(|(c, _)| *c != k)
            .map(|(_, (z, b))| z * b)
            .sum();
        h = h.min((min_pow + gamma * eta_rest) / (gamma * z_ik));
    }
    Ok(h)
}

/// Precomputed interval memberships and exposures for one `(data, partition)`
/// pair, so repeated likelihood evaluations skip the partition arithmetic.
pub struct LikelihoodContext<'a> {
    data: &'a SurvivalDataset,
    partition: &'a TimePartition,
    gamma: f64,
    inv_gamma: f64,
    event_interval: Vec<usize>,
    exposure: Vec<f64>, // n x J row-major
}

impl<'a> LikelihoodContext<'a> {
    pub fn new(
        data: &'a SurvivalDataset,
        partition: &'a TimePartition,
        gamma: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Domain(format!("gamma {} outside [0, 1]", gamma)));
        }
        let j_count = partition.intervals();
        let mut event_interval = Vec::with_capacity(data.n());
        let mut exposure = Vec::with_capacity(data.n() * j_count);
        for i in 0..data.n() {
            let y = data.time(i);
            event_interval.push(partition.interval_index(y)?);
            for j in 0..j_count {
                exposure.push(partition.exposure(y, j));
            }
        }
        Ok(Self { data, partition, gamma, inv_gamma: 1.0 / gamma, event_interval, exposure })
    }

    pub fn data(&self) -> &SurvivalDataset {
        self.data
    }

    pub fn partition(&self) -> &TimePartition {
        self.partition
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Log-likelihood at `(beta, lambda)`. Returns `-inf` when the state is
    /// inadmissible (constraint violation, nonpositive baseline, or an event
    /// hazard below the representable floor).
    pub fn log_likelihood(&self, beta: &[f64], lambda: &[f64]) -> f64 {
        debug_assert_eq!(beta.len(), self.data.p());
        debug_assert_eq!(lambda.len(), self.partition.intervals());
        if lambda.iter().any(|l| !(*l > 0.0)) {
            return f64::NEG_INFINITY;
        }
        let j_count = lambda.len();
        let gamma = self.gamma;
        let mut total = 0.0;
        if gamma == 0.0 {
            let log_lambda: Vec<f64> = lambda.iter().map(|l| l.ln()).collect();
            for i in 0..self.data.n() {
                let eta = self.data.linear_predictor(beta, i);
                let ji = self.event_interval[i];
                let exposures = &self.exposure[i * j_count..(i + 1) * j_count];
                let mut base_exposure = 0.0;
                for j in 0..=ji {
                    base_exposure += lambda[j] * exposures[j];
                }
                total -= base_exposure * eta.exp();
                if self.data.is_event(i) {
                    let log_h = log_lambda[ji] + eta;
                    if log_h < LOG_HAZARD_FLOOR {
                        return f64::NEG_INFINITY;
                    }
                    total += log_h;
                }
            }
        } else {
            let lambda_pow: Vec<f64> = lambda.iter().map(|l| pow_gamma(*l, gamma)).collect();
            for i in 0..self.data.n() {
                let eta = gamma * self.data.linear_predictor(beta, i);
                let ji = self.event_interval[i];
                let exposures = &self.exposure[i * j_count..(i + 1) * j_count];
                let mut cumulative = 0.0;
                for j in 0..=ji {
                    let u = lambda_pow[j] + eta;
                    if u < 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    cumulative += pow_inv_gamma(u, gamma, self.inv_gamma) * exposures[j];
                }
                total -= cumulative;
                if self.data.is_event(i) {
                    let u = lambda_pow[ji] + eta;
                    let log_h = self.inv_gamma * u.ln();
                    if log_h < LOG_HAZARD_FLOOR {
                        return f64::NEG_INFINITY;
                    }
                    total += log_h;
                }
            }
        }
        if total.is_nan() {
            return f64::NEG_INFINITY;
        }
        total
    }
}

/// Log-likelihood of the piecewise-exponential transformation model,
/// `sum_i [nu_i * log h_{j(i)} - H_i]` with the interval-overlap cumulative
/// hazard `H_i`. See [`LikelihoodContext::log_likelihood`] for the sentinel
/// semantics.
pub fn log_likelihood(
    state: &ParameterState,
    data: &SurvivalDataset,
    partition: &TimePartition,
    gamma: f64,
) -> Result<f64> {
    if state.beta.len() != data.p() {
        return Err(Error::Domain(format!(
            "{} coefficients for {} covariates",
            state.beta.len(),
            data.p()
        )));
    }
    if state.lambda.len() != partition.intervals() {
        return Err(Error::Domain(format!(
            "{} baseline levels for {} intervals",
            state.lambda.len(),
            partition.intervals()
        )));
    }
    let ctx = LikelihoodContext::new(data, partition, gamma)?;
    Ok(ctx.log_likelihood(&state.beta, &state.lambda))
}

/// Normalizing constant of the truncated-normal prior on the constrained
/// coefficient: `log[sqrt(2*pi) * sigma_k * (1 - Phi(-h_gamma / sigma_k))]`,
/// evaluated through the stable log-CDF.
pub fn log_norm_constant(
    lambda: &[f64],
    beta: &[f64],
    data: &SurvivalDataset,
    config: &ModelConfig,
) -> Result<f64> {
    let h = h_gamma(lambda, beta, data, config.constrained, config.gamma)?;
    let sigma_k = config.sigma_k();
    if h.is_infinite() {
        return Ok(LN_SQRT_2PI + sigma_k.ln());
    }
    Ok(LN_SQRT_2PI + sigma_k.ln() + log_normal_cdf(h / sigma_k))
}

/// Log-density (up to the Gaussian constant) of the truncated-normal prior on
/// the constrained coefficient: `-beta_k^2 / (2 sigma_k^2) - log c` on the
/// admissible half-line, `-inf` below it. At `gamma = 0` no truncation
/// applies and the plain normal kernel is returned.
pub fn log_prior_beta_k(
    beta_k: f64,
    lambda: &[f64],
    beta: &[f64],
    data: &SurvivalDataset,
    config: &ModelConfig,
) -> Result<f64> {
    let sigma_k = config.sigma_k();
    let kernel = -beta_k * beta_k / (2.0 * sigma_k * sigma_k);
    if config.gamma == 0.0 {
        return Ok(kernel);
    }
    let h = h_gamma(lambda, beta, data, config.constrained, config.gamma)?;
    if beta_k < -h {
        return Ok(f64::NEG_INFINITY);
    }
    let log_c = if h.is_infinite() {
        LN_SQRT_2PI + sigma_k.ln()
    } else {
        LN_SQRT_2PI + sigma_k.ln() + log_normal_cdf(h / sigma_k)
    };
    Ok(kernel - log_c)
}

/// Unnormalized normal prior log-kernel for an unconstrained coefficient.
pub fn log_prior_beta_l(beta_l: f64, sigma_l: f64) -> f64 {
    -beta_l * beta_l / (2.0 * sigma_l * sigma_l)
}

/// Unnormalized Gamma(alpha, xi) prior log-kernel for a baseline level;
/// `-inf` off the positive half-line.
pub fn log_prior_lambda_j(lambda_j: f64, alpha: f64, xi: f64) -> f64 {
    if !(lambda_j > 0.0) {
        return f64::NEG_INFINITY;
    }
    (alpha - 1.0) * lambda_j.ln() - xi * lambda_j
}

//! Domain types and closed-form model mathematics.

mod likelihood;
mod types;

pub use likelihood::{
    box_cox, constraint_satisfied, h_gamma, hazard, log_likelihood, log_norm_constant,
    log_prior_beta_k, log_prior_beta_l, log_prior_lambda_j, LikelihoodContext,
};
pub use types::{ModelConfig, ParameterState, SurvivalDataset, TimePartition};

pub(crate) mod likelihood_internals {
    pub(crate) use super::likelihood::pow_gamma;
}
